//! Independent reference computations shared by the integration tests.
//! Deliberately plain: composite Simpson on fixed grids and bisection, no
//! code from the library beyond the distribution objects.
#![allow(dead_code)]

use contest_eq::ScalarDistribution;

pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Normal-normal reference model with profile `α f 1{q ≥ Q}`.
#[derive(Clone, Copy, Debug)]
pub struct Ref {
    pub mu_q: f64,
    pub sd_q: f64,
    pub sd_s: f64,
    pub k: f64,
}

impl Ref {
    pub fn f(&self) -> ScalarDistribution {
        ScalarDistribution::normal(self.mu_q, self.sd_q * self.sd_q).unwrap()
    }

    pub fn g(&self) -> ScalarDistribution {
        ScalarDistribution::normal(0.0, self.sd_s * self.sd_s).unwrap()
    }

    fn upper(&self) -> f64 {
        self.mu_q + 12.0 * self.sd_q
    }

    fn lower(&self, q: f64) -> f64 {
        q.max(self.mu_q - 12.0 * self.sd_q)
    }

    /// `∫ α f(q) h(q) 1{q ≥ Q}`.
    pub fn integral<H: Fn(f64) -> f64>(&self, alpha: f64, q: f64, h: H) -> f64 {
        let f = self.f();
        alpha * simpson(|x| f.pdf(x) * h(x), self.lower(q), self.upper(), 40_000)
    }

    /// Clearing signal cutoff, or `None` when the profile is undersubscribed.
    pub fn sbar(&self, alpha: f64, q: f64) -> Option<f64> {
        let g = self.g();
        let vol = alpha * self.f().sf(q);
        if vol <= self.k {
            return None;
        }
        let span = 20.0 * (self.sd_q + self.sd_s);
        Some(bisect(
            |s| self.integral(alpha, q, |x| g.sf(s - x)) - self.k,
            self.mu_q - span,
            self.mu_q + span,
        ))
    }

    pub fn win(&self, sbar: Option<f64>, q: f64) -> f64 {
        match sbar {
            None => 1.0,
            Some(s) => self.g().sf(s - q),
        }
    }

    /// Ex-ante winning mass of a researcher using cutoff `q` against `sbar`.
    pub fn win_mass(&self, sbar: Option<f64>, q: f64) -> f64 {
        self.integral(1.0, q, |x| self.win(sbar, x))
    }
}

/// Fixed point of `x ↦ a + b x` by plain iteration.
pub fn iterate_linear(a: f64, b: f64) -> f64 {
    let mut x = 0.0;
    for _ in 0..100_000 {
        let nx = a + b * x;
        if (nx - x).abs() <= 1e-14 * (1.0 + nx.abs()) {
            return nx;
        }
        x = nx;
    }
    x
}
