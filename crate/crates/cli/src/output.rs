use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

/// `<outdir>/<command>-<timestamp>/` with the resolved config and a log.
pub struct RunDir {
    pub path: PathBuf,
    log: File,
    start: Instant,
}

impl RunDir {
    pub fn create(cfg: &ExperimentConfig) -> Result<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let stem = format!("{}-{stamp}", cfg.command.name());
        fs::create_dir_all(&cfg.outdir).with_context(|| format!("creating {}", cfg.outdir.display()))?;
        let mut path = cfg.outdir.join(&stem);
        let mut k = 1;
        while path.exists() {
            path = cfg.outdir.join(format!("{stem}-{k}"));
            k += 1;
        }
        fs::create_dir(&path).with_context(|| format!("creating {}", path.display()))?;
        fs::write(path.join("config.toml"), cfg.to_toml())?;
        let log = File::create(path.join("log"))?;
        let mut run = Self { path, log, start: Instant::now() };
        run.note(format!("multiwell {} {}", env!("CARGO_PKG_VERSION"), cfg.command.name()));
        Ok(run)
    }

    pub fn note(&mut self, msg: impl AsRef<str>) {
        let _ = writeln!(self.log, "[{:9.3} s] {}", self.start.elapsed().as_secs_f64(), msg.as_ref());
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path.join(name);
        Ok(BufWriter::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?))
    }

    pub fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut f = self.file(name)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        writeln!(f)?;
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
