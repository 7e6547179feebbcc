//! Mergeable running moments (Welford / Chan) for Monte Carlo reductions.

/// Running mean and variance of one statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

impl FromIterator<f64> for MeanVar {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = MeanVar::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Running first and second moments of a pair, including the co-moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoMoments {
    n: u64,
    mean_x: f64,
    mean_y: f64,
    m2x: f64,
    m2y: f64,
    cxy: f64,
}

impl CoMoments {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2x += dx * (x - self.mean_x);
        self.m2y += dy * (y - self.mean_y);
        self.cxy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, other: &CoMoments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.m2x += other.m2x + dx * dx * na * nb / n;
        self.m2y += other.m2y + dy * dy * na * nb / n;
        self.cxy += other.cxy + dx * dy * na * nb / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean_x(&self) -> f64 {
        self.mean_x
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    fn denom(&self) -> f64 {
        (self.n.max(2) - 1) as f64
    }

    pub fn var_x(&self) -> f64 {
        self.m2x / self.denom()
    }

    pub fn var_y(&self) -> f64 {
        self.m2y / self.denom()
    }

    pub fn cov(&self) -> f64 {
        self.cxy / self.denom()
    }

    /// Ratio of means `mean_x / mean_y` with its delta-method standard error.
    pub fn ratio(&self) -> (f64, f64) {
        let r = self.mean_x / self.mean_y;
        let n = self.n as f64;
        let var = (self.var_x() - 2.0 * r * self.cov() + r * r * self.var_y())
            / (self.mean_y * self.mean_y * n);
        (r, var.max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let whole: MeanVar = xs.iter().copied().collect();
        let mut left: MeanVar = xs[..313].iter().copied().collect();
        let right: MeanVar = xs[313..].iter().copied().collect();
        left.merge(&right);
        assert!((whole.mean() - left.mean()).abs() < 1e-12);
        assert!((whole.variance() - left.variance()).abs() < 1e-10);

        let mut a = CoMoments::default();
        let mut b = CoMoments::default();
        let mut c = CoMoments::default();
        for (i, &x) in xs.iter().enumerate() {
            let y = 2.0 * x + (i % 7) as f64;
            a.push(x, y);
            if i < 500 { b.push(x, y) } else { c.push(x, y) }
        }
        b.merge(&c);
        assert!((a.cov() - b.cov()).abs() < 1e-9);
        assert!((a.var_y() - b.var_y()).abs() < 1e-9);
    }

    #[test]
    fn ratio_of_identical_streams_is_one_with_zero_se() {
        let mut m = CoMoments::default();
        for i in 0..100 {
            let v = 1.0 + (i % 5) as f64;
            m.push(v, v);
        }
        let (r, se) = m.ratio();
        assert_eq!(r, 1.0);
        assert!(se < 1e-12);
    }
}
