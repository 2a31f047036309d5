//! Benchmark fixtures.

/// Dense symmetric `n × n` matrix, row-major, with a dominant diagonal.
pub fn symmetric_matrix(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = if i == j { i as f64 + 1.0 } else { ((i * 31 + j * 17) as f64).sin() / (1.0 + (i - j) as f64) };
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

/// Lower band storage `band[i * (bw + 1) + (i − j)] = A[i][j]`.
pub fn banded_matrix(n: usize, bw: usize) -> Vec<f64> {
    let mut band = vec![0.0; (bw + 1) * n];
    for i in 0..n {
        for d in 0..=bw.min(i) {
            band[i * (bw + 1) + d] = if d == 0 { (i as f64 + 0.5).powf(1.5) } else { ((i + 3 * d) as f64).cos() / d as f64 };
        }
    }
    band
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_symmetric() {
        let n = 7;
        let a = symmetric_matrix(n);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(a[i * n + j], a[j * n + i]);
            }
        }
        assert_eq!(banded_matrix(10, 4).len(), 50);
    }
}
