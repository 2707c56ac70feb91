//! Kolmogorov–Smirnov statistics and empirical distribution functions.

/// Asymptotic 99% coefficient `c(α)` of the KS distribution.
pub const KS_C99: f64 = 1.628;

/// Right-continuous empirical CDF of a sample (ties allowed).
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut sample: Vec<f64>) -> Self {
        sample.sort_by(f64::total_cmp);
        Self { sorted: sample }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample `≤ x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    /// `sup_x |F_n(x) − F(x)|` against a continuous CDF.
    pub fn ks_against<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.sorted.len() as f64;
        self.sorted.iter().enumerate().fold(0.0, |acc, (i, &x)| {
            let f = cdf(x);
            let hi = (i as f64 + 1.0) / n - f;
            let lo = f - i as f64 / n;
            acc.max(hi).max(lo)
        })
    }

    /// Two-sample statistic `sup_x |F_n(x) − G_m(x)|`.
    pub fn ks_two_sample(&self, other: &EmpiricalCdf) -> f64 {
        let (a, b) = (&self.sorted, &other.sorted);
        if a.is_empty() || b.is_empty() {
            return if a.len() == b.len() { 0.0 } else { 1.0 };
        }
        let (n, m) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j) = (0usize, 0usize);
        let mut d: f64 = 0.0;
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / n - j as f64 / m).abs());
        }
        d
    }
}

/// One-sample KS statistic of `sample` against `cdf`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    EmpiricalCdf::new(sample.to_vec()).ks_against(cdf)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    EmpiricalCdf::new(a.to_vec()).ks_two_sample(&EmpiricalCdf::new(b.to_vec()))
}

/// 99% critical value for a one-sample test of size `n`.
pub fn critical_one_sample(n: usize) -> f64 {
    KS_C99 / (n as f64).sqrt()
}

/// 99% critical value for a two-sample test of sizes `n`, `m`.
pub fn critical_two_sample(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    KS_C99 * ((n + m) / (n * m)).sqrt()
}

/// 99% quantile of the chi-square distribution with `dof` degrees of freedom
/// (Wilson–Hilferty; relative error below 1% for `dof ≥ 3`).
pub fn chi_square_critical_99(dof: usize) -> f64 {
    const Z99: f64 = 2.326_347_874_040_841;
    let v = dof.max(1) as f64;
    let c = 2.0 / (9.0 * v);
    v * (1.0 - c + Z99 * c.sqrt()).powi(3)
}

/// Fenwick tree over ranks, counting inserted points.
struct Fenwick(Vec<u32>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0; n + 1])
    }
    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }
    /// number of inserted ranks `<= i`
    fn prefix(&self, i: usize) -> u32 {
        let mut i = i + 1;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// For every query point, the number of `points` with `x ≤ qx` and `y ≤ qy`.
fn dominance_counts(points: &[(f64, f64)], queries: &[(f64, f64)], y_ranks: &[f64]) -> Vec<u32> {
    let rank = |v: f64| y_ranks.partition_point(|r| *r <= v);
    let mut pts: Vec<(f64, usize)> = points.iter().map(|&(x, y)| (x, rank(y))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a].0.total_cmp(&queries[b].0));
    let mut tree = Fenwick::new(y_ranks.len() + 1);
    let mut out = vec![0; queries.len()];
    let mut k = 0;
    for &qi in &order {
        let (qx, qy) = queries[qi];
        while k < pts.len() && pts[k].0 <= qx {
            // ranks are 1-based counts of values <= y; store at rank-1
            tree.add(pts[k].1.saturating_sub(1));
            k += 1;
        }
        let r = rank(qy);
        out[qi] = if r == 0 { 0 } else { tree.prefix(r - 1) };
    }
    out
}

/// Two-sample two-dimensional KS statistic (Peacock's quadrant form,
/// evaluated at every pooled point), in `O(N log N)`.
pub fn ks_two_sample_2d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let pooled: Vec<(f64, f64)> = a.iter().chain(b).copied().collect();
    let mut ys: Vec<f64> = pooled.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let xa = EmpiricalCdf::new(a.iter().map(|p| p.0).collect());
    let ya = EmpiricalCdf::new(a.iter().map(|p| p.1).collect());
    let xb = EmpiricalCdf::new(b.iter().map(|p| p.0).collect());
    let yb = EmpiricalCdf::new(b.iter().map(|p| p.1).collect());
    let ca = dominance_counts(a, &pooled, &ys);
    let cb = dominance_counts(b, &pooled, &ys);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    for (i, &(x, y)) in pooled.iter().enumerate() {
        let (fa_xy, fb_xy) = (f64::from(ca[i]) / na, f64::from(cb[i]) / nb);
        let (fa_x, fb_x) = (xa.eval(x), xb.eval(x));
        let (fa_y, fb_y) = (ya.eval(y), yb.eval(y));
        // quadrants: (≤,≤), (≤,>), (>,≤), (>,>)
        let qa = [fa_xy, fa_x - fa_xy, fa_y - fa_xy, 1.0 - fa_x - fa_y + fa_xy];
        let qb = [fb_xy, fb_x - fb_xy, fb_y - fb_xy, 1.0 - fb_x - fb_y + fb_xy];
        for k in 0..4 {
            d = d.max((qa[k] - qb[k]).abs());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngStream;

    #[test]
    fn single_point_jumps_at_zero() {
        let e = EmpiricalCdf::new(vec![0.0]);
        assert_eq!(e.eval(-1e-12), 0.0);
        assert_eq!(e.eval(0.0), 1.0);
    }

    #[test]
    fn two_points() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0]);
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.5);
        assert_eq!(e.eval(2.9), 0.5);
        assert_eq!(e.eval(3.0), 1.0);
    }

    #[test]
    fn ties_count_together() {
        let e = EmpiricalCdf::new(vec![1.0, 1.0, 1.0, 2.0]);
        assert_eq!(e.eval(1.0), 0.75);
    }

    #[test]
    fn one_sample_brute_force() {
        let xs = vec![0.1, 0.4, 0.45, 0.9];
        // uniform CDF: brute force sup over a fine grid of both one-sided limits
        let mut brute: f64 = 0.0;
        for i in 0..=10_000 {
            let x = i as f64 / 10_000.0;
            let left = xs.iter().filter(|v| **v < x).count() as f64 / 4.0;
            let right = xs.iter().filter(|v| **v <= x).count() as f64 / 4.0;
            brute = brute.max((left - x).abs()).max((right - x).abs());
        }
        let ks = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!((ks - brute).abs() < 1e-3);
    }

    #[test]
    fn two_sample_identical_is_zero_and_disjoint_is_one() {
        let a = vec![1.0, 2.0, 3.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &[4.0, 5.0]), 1.0);
        assert!((ks_two_sample(&[1.0, 2.0], &[1.5]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_dimensional_brute_force() {
        let mut rng = RngStream::new(4, 4);
        let a: Vec<(f64, f64)> = (0..60).map(|_| (rng.uniform(), rng.uniform())).collect();
        let b: Vec<(f64, f64)> = (0..45).map(|_| (rng.uniform().powi(2), rng.uniform())).collect();
        let frac = |s: &[(f64, f64)], f: &dyn Fn(&(f64, f64)) -> bool| s.iter().filter(|p| f(p)).count() as f64 / s.len() as f64;
        let mut brute: f64 = 0.0;
        for &(x, y) in a.iter().chain(&b) {
            let quads: [Box<dyn Fn(&(f64, f64)) -> bool>; 4] = [
                Box::new(move |p| p.0 <= x && p.1 <= y),
                Box::new(move |p| p.0 <= x && p.1 > y),
                Box::new(move |p| p.0 > x && p.1 <= y),
                Box::new(move |p| p.0 > x && p.1 > y),
            ];
            for q in &quads {
                brute = brute.max((frac(&a, q.as_ref()) - frac(&b, q.as_ref())).abs());
            }
        }
        let fast = ks_two_sample_2d(&a, &b);
        assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
    }

    #[test]
    fn chi_square_quantiles() {
        // tabulated 0.99 quantiles
        for (dof, q) in [(5, 15.086), (9, 21.666), (15, 30.578), (35, 57.342)] {
            assert!((chi_square_critical_99(dof) - q).abs() / q < 5e-3, "{dof}");
        }
    }

    #[test]
    fn critical_values() {
        assert!((critical_one_sample(100_000) - 0.005148).abs() < 1e-5);
        assert!((critical_two_sample(100_000, 100_000) - 0.007281).abs() < 1e-5);
    }
}
