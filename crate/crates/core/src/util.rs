#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, `None` when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let denom = norm(a) * norm(b);
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    Some((dot(a, b) / denom).clamp(-1.0, 1.0))
}

/// Scales `a` to unit length in place. Zero vectors are left untouched.
pub fn normalize(a: &mut [f64]) {
    let n = norm(a);
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

/// Compensated (Kahan) accumulator over vectors.
#[derive(Clone, Debug)]
pub struct KahanVec {
    sum: Vec<f64>,
    carry: Vec<f64>,
}

impl KahanVec {
    pub fn new(dim: usize) -> Self {
        KahanVec {
            sum: vec![0.0; dim],
            carry: vec![0.0; dim],
        }
    }

    pub fn add<T: Copy + Into<f64>>(&mut self, v: &[T]) {
        for ((s, c), &x) in self.sum.iter_mut().zip(&mut self.carry).zip(v) {
            let y = x.into() - *c;
            let t = *s + y;
            *c = (t - *s) - y;
            *s = t;
        }
    }

    pub fn into_sum(self) -> Vec<f64> {
        self.sum
    }
}

/// `ln σ(x)` without overflow.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), Some(0.0));
        assert_eq!(cosine(&[1.0, 0.0], &[-2.0, 0.0]), Some(-1.0));
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), None);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kahan_beats_naive_on_cancellation() {
        let mut k = KahanVec::new(1);
        k.add(&[1.0f64]);
        for _ in 0..10_000 {
            k.add(&[1e-16f64]);
        }
        let s = k.into_sum()[0];
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
