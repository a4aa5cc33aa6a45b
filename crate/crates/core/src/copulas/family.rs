//! Bivariate copula families with densities, CDFs, h-functions and their
//! inverses, Kendall's tau and tail-dependence coefficients.
//!
//! Naming of the conditional distributions:
//! `h_given_first(u, v) = ∂C/∂u = P(V ≤ v | U = u)` and
//! `h_given_second(u, v) = ∂C/∂v = P(U ≤ u | V = v)`.
//!
//! Tawn type 2 is the extreme-value copula `C = exp(-ℓ(x, y))` with
//! `x = -ln u`, `y = -ln v` and stable tail function
//! `ℓ(x, y) = (1 - δ) y + (x^θ + (δ y)^θ)^{1/θ}`, `θ ≥ 1`, `δ ∈ [0, 1]`.
//! `δ = 1` gives Gumbel, `δ = 0` independence.

use std::f64::consts::PI;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numeric::{brent_root, integrate};
use crate::special::{student_t_cdf, student_t_quantile, std_normal_cdf, std_normal_quantile};

pub const U_EPS: f64 = 1e-10;

static CLAMPS: AtomicUsize = AtomicUsize::new(0);

/// Number of copula arguments clamped into `[U_EPS, 1 - U_EPS]` so far.
pub fn boundary_clamp_count() -> usize {
    CLAMPS.load(Ordering::Relaxed)
}

pub(crate) fn clamp_unit(x: f64) -> f64 {
    if x < U_EPS {
        CLAMPS.fetch_add(1, Ordering::Relaxed);
        U_EPS
    } else if x > 1.0 - U_EPS {
        CLAMPS.fetch_add(1, Ordering::Relaxed);
        1.0 - U_EPS
    } else if x.is_nan() {
        CLAMPS.fetch_add(1, Ordering::Relaxed);
        0.5
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Frank,
    Gumbel,
    Joe,
    Tawn2,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 8] = [
        CopulaFamily::Independence,
        CopulaFamily::Gaussian,
        CopulaFamily::StudentT,
        CopulaFamily::Clayton,
        CopulaFamily::Frank,
        CopulaFamily::Gumbel,
        CopulaFamily::Joe,
        CopulaFamily::Tawn2,
    ];

    pub fn n_params(self) -> usize {
        match self {
            CopulaFamily::Independence => 0,
            CopulaFamily::StudentT | CopulaFamily::Tawn2 => 2,
            _ => 1,
        }
    }

    /// Closed admissible parameter box used for fitting and as the default
    /// uniform prior support.
    pub fn bounds(self) -> Vec<(f64, f64)> {
        match self {
            CopulaFamily::Independence => vec![],
            CopulaFamily::Gaussian => vec![(-0.999, 0.999)],
            CopulaFamily::StudentT => vec![(-0.999, 0.999), (2.001, 50.0)],
            CopulaFamily::Clayton => vec![(1e-4, 50.0)],
            CopulaFamily::Frank => vec![(-35.0, 35.0)],
            CopulaFamily::Gumbel => vec![(1.0, 50.0)],
            CopulaFamily::Joe => vec![(1.0, 30.0)],
            CopulaFamily::Tawn2 => vec![(1.0, 20.0), (0.0, 1.0)],
        }
    }

    /// Families with one-sided dependence that come in four rotations.
    pub fn rotatable(self) -> bool {
        matches!(self, CopulaFamily::Clayton | CopulaFamily::Gumbel | CopulaFamily::Joe | CopulaFamily::Tawn2)
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "independence" | "indep" => CopulaFamily::Independence,
            "gaussian" | "normal" => CopulaFamily::Gaussian,
            "studentt" | "t" => CopulaFamily::StudentT,
            "clayton" => CopulaFamily::Clayton,
            "frank" => CopulaFamily::Frank,
            "gumbel" => CopulaFamily::Gumbel,
            "joe" => CopulaFamily::Joe,
            "tawn2" | "tawntype2" | "tawn" => CopulaFamily::Tawn2,
            other => return Err(Error::Config(format!("unknown copula family `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn degrees(self) -> u32 {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 90,
            Rotation::R180 => 180,
            Rotation::R270 => 270,
        }
    }

    /// 90 and 270 flip the sign of the dependence.
    pub fn negates(self) -> bool {
        matches!(self, Rotation::R90 | Rotation::R270)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCopula {
    pub family: CopulaFamily,
    pub rotation: Rotation,
    pub params: Vec<f64>,
}

impl fmt::Display for PairCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.family)?;
        if self.rotation != Rotation::R0 {
            write!(f, "(rot {})", self.rotation.degrees())?;
        }
        let ps: Vec<String> = self.params.iter().map(|p| format!("{p:.6}")).collect();
        write!(f, "[{}]", ps.join(", "))
    }
}

/// Parameters of the stable tail function at `(x, y)`:
/// `(ℓ, ∂ℓ/∂x, ∂ℓ/∂y, ∂²ℓ/∂x∂y)`.
fn ev_parts(theta: f64, delta: f64, x: f64, y: f64) -> (f64, f64, f64, f64) {
    let dt = delta.powf(theta);
    let s = x.powf(theta) + dt * y.powf(theta);
    let a = s.powf(1.0 / theta);
    let s1 = a / s; // S^{1/θ - 1}
    let lx = x.powf(theta - 1.0) * s1;
    let ly = (1.0 - delta) + dt * y.powf(theta - 1.0) * s1;
    let lxy = (1.0 - theta) * dt * (x * y).powf(theta - 1.0) * s1 / s;
    ((1.0 - delta) * y + a, lx, ly, lxy)
}

/// `ln(u^-θ + v^-θ - 1)` without overflow.
fn clayton_ln_a(theta: f64, u: f64, v: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b);
    if m < 30.0 {
        (a.exp_m1() + b.exp_m1()).ln_1p()
    } else {
        m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
    }
}

impl PairCopula {
    pub fn new(family: CopulaFamily, rotation: Rotation, params: Vec<f64>) -> Result<PairCopula> {
        let c = PairCopula { family, rotation, params };
        c.validate()?;
        Ok(c)
    }

    pub fn independence() -> PairCopula {
        PairCopula { family: CopulaFamily::Independence, rotation: Rotation::R0, params: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.family.bounds();
        if self.params.len() != b.len() {
            return Err(Error::domain(format!(
                "{:?} takes {} parameters, got {}",
                self.family,
                b.len(),
                self.params.len()
            )));
        }
        for (p, (lo, hi)) in self.params.iter().zip(&b) {
            if !(p >= lo && p <= hi) {
                return Err(Error::domain(format!("{self}: parameter {p} outside [{lo}, {hi}]")));
            }
        }
        if self.family == CopulaFamily::Frank && self.params[0] == 0.0 {
            return Err(Error::domain("Frank parameter must be nonzero"));
        }
        if self.rotation != Rotation::R0 && !self.family.rotatable() {
            return Err(Error::domain(format!("{:?} has no rotated versions", self.family)));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.family.n_params()
    }

    fn p(&self, i: usize) -> f64 {
        self.params[i]
    }

    // ---- unrotated building blocks ----

    fn base_ln_pdf(&self, u: f64, v: f64) -> f64 {
        match self.family {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Gaussian => {
                let r = self.p(0);
                let (x, y) = (std_normal_quantile(u), std_normal_quantile(v));
                let q = 1.0 - r * r;
                -0.5 * q.ln() - (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * q)
            }
            CopulaFamily::StudentT => {
                let (r, nu) = (self.p(0), self.p(1));
                let (x, y) = (student_t_quantile(u, nu), student_t_quantile(v, nu));
                let q = 1.0 - r * r;
                ln_gamma((nu + 2.0) / 2.0) + ln_gamma(nu / 2.0) - 2.0 * ln_gamma((nu + 1.0) / 2.0) - 0.5 * q.ln()
                    - (nu + 2.0) / 2.0 * ((x * x + y * y - 2.0 * r * x * y) / (nu * q)).ln_1p()
                    + (nu + 1.0) / 2.0 * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
            }
            CopulaFamily::Clayton => {
                let t = self.p(0);
                (1.0 + t).ln() - (1.0 + t) * (u.ln() + v.ln()) - (1.0 / t + 2.0) * clayton_ln_a(t, u, v)
            }
            CopulaFamily::Frank => {
                let t = self.p(0);
                let em = (-t).exp_m1();
                let den = em + (-t * u).exp_m1() * (-t * v).exp_m1();
                (-t * em).ln() - t * (u + v) - 2.0 * den.abs().ln()
            }
            CopulaFamily::Gumbel | CopulaFamily::Tawn2 => {
                let (t, d) = self.ev_params();
                let (x, y) = (-u.ln(), -v.ln());
                let (l, lx, ly, lxy) = ev_parts(t, d, x, y);
                -l + x + y + (lx * ly - lxy).ln()
            }
            CopulaFamily::Joe => {
                let t = self.p(0);
                let (a, b) = ((1.0 - u).powf(t), (1.0 - v).powf(t));
                let d = a + b - a * b;
                (1.0 / t - 2.0) * d.ln() + (t - 1.0) * ((1.0 - u).ln() + (1.0 - v).ln()) + (t - 1.0 + d).ln()
            }
        }
    }

    fn ev_params(&self) -> (f64, f64) {
        match self.family {
            CopulaFamily::Gumbel => (self.p(0), 1.0),
            _ => (self.p(0), self.p(1)),
        }
    }

    fn base_cdf(&self, u: f64, v: f64) -> f64 {
        match self.family {
            CopulaFamily::Independence => u * v,
            CopulaFamily::Gaussian => {
                let r = self.p(0);
                let (x, y) = (std_normal_quantile(u), std_normal_quantile(v));
                // Plackett: dΦ2/dρ = φ2
                let phi2 = |rr: f64| {
                    let q = 1.0 - rr * rr;
                    (-(x * x - 2.0 * rr * x * y + y * y) / (2.0 * q)).exp() / (2.0 * PI * q.sqrt())
                };
                (u * v + integrate(phi2, 0.0, r, 1e-14, 1e-12)).clamp(0.0, u.min(v))
            }
            CopulaFamily::StudentT => {
                let c = integrate(|s| self.base_h_first(s, v), 0.0, u, 1e-14, 1e-12);
                c.clamp(0.0, u.min(v))
            }
            CopulaFamily::Clayton => (-clayton_ln_a(self.p(0), u, v) / self.p(0)).exp(),
            CopulaFamily::Frank => {
                let t = self.p(0);
                -((-t * u).exp_m1() * (-t * v).exp_m1() / (-t).exp_m1()).ln_1p() / t
            }
            CopulaFamily::Gumbel | CopulaFamily::Tawn2 => {
                let (t, d) = self.ev_params();
                (-ev_parts(t, d, -u.ln(), -v.ln()).0).exp()
            }
            CopulaFamily::Joe => {
                let t = self.p(0);
                let (a, b) = ((1.0 - u).powf(t), (1.0 - v).powf(t));
                1.0 - (a + b - a * b).powf(1.0 / t)
            }
        }
    }

    /// `∂C/∂u` for the unrotated copula.
    fn base_h_first(&self, u: f64, v: f64) -> f64 {
        let h = match self.family {
            CopulaFamily::Tawn2 => {
                let (t, d) = self.ev_params();
                let (x, y) = (-u.ln(), -v.ln());
                let (l, lx, _, _) = ev_parts(t, d, x, y);
                (-l + x).exp() * lx
            }
            _ => self.base_h_second(v, u),
        };
        h.clamp(0.0, 1.0)
    }

    /// `∂C/∂v` for the unrotated copula (exchangeable families use symmetry).
    fn base_h_second(&self, u: f64, v: f64) -> f64 {
        let h = match self.family {
            CopulaFamily::Independence => u,
            CopulaFamily::Gaussian => {
                let r = self.p(0);
                let (x, y) = (std_normal_quantile(u), std_normal_quantile(v));
                std_normal_cdf((x - r * y) / (1.0 - r * r).sqrt())
            }
            CopulaFamily::StudentT => {
                let (r, nu) = (self.p(0), self.p(1));
                let (x, y) = (student_t_quantile(u, nu), student_t_quantile(v, nu));
                let s = ((nu + y * y) * (1.0 - r * r) / (nu + 1.0)).sqrt();
                student_t_cdf((x - r * y) / s, nu + 1.0)
            }
            CopulaFamily::Clayton => {
                let t = self.p(0);
                (-(t + 1.0) * v.ln() - (1.0 / t + 1.0) * clayton_ln_a(t, u, v)).exp()
            }
            CopulaFamily::Frank => {
                let t = self.p(0);
                let (eu, ev) = ((-t * u).exp_m1(), (-t * v).exp_m1());
                (-t * v).exp() * eu / ((-t).exp_m1() + eu * ev)
            }
            CopulaFamily::Gumbel | CopulaFamily::Tawn2 => {
                let (t, d) = self.ev_params();
                let (x, y) = (-u.ln(), -v.ln());
                let (l, _, ly, _) = ev_parts(t, d, x, y);
                (-l + y).exp() * ly
            }
            CopulaFamily::Joe => {
                let t = self.p(0);
                let (a, b) = ((1.0 - u).powf(t), (1.0 - v).powf(t));
                let d = a + b - a * b;
                (1.0 - v).powf(t - 1.0) * (1.0 - a) * d.powf(1.0 / t - 1.0)
            }
        };
        h.clamp(0.0, 1.0)
    }

    /// Solve `base_h_first(u, v) = w` for `v`.
    fn base_h_first_inverse(&self, u: f64, w: f64) -> f64 {
        let v = match self.family {
            CopulaFamily::Independence => w,
            CopulaFamily::Gaussian => {
                let r = self.p(0);
                std_normal_cdf(r * std_normal_quantile(u) + (1.0 - r * r).sqrt() * std_normal_quantile(w))
            }
            CopulaFamily::StudentT => {
                let (r, nu) = (self.p(0), self.p(1));
                let x = student_t_quantile(u, nu);
                let s = ((nu + x * x) * (1.0 - r * r) / (nu + 1.0)).sqrt();
                student_t_cdf(r * x + s * student_t_quantile(w, nu + 1.0), nu)
            }
            CopulaFamily::Clayton => {
                let t = self.p(0);
                // v^-θ = (w u^{θ+1})^{-θ/(θ+1)} + 1 - u^-θ
                let a = (-t / (t + 1.0)) * (w.ln() + (t + 1.0) * u.ln());
                let b = -t * u.ln();
                let z = if a < 30.0 { a.exp() - b.exp_m1() } else { a.exp() * (1.0 - (b - a).exp() + (-a).exp()) };
                (-z.ln() / t).exp()
            }
            CopulaFamily::Frank => {
                let t = self.p(0);
                let e = w * (-t).exp_m1() / ((-t * u).exp() - w * (-t * u).exp_m1());
                -e.ln_1p() / t
            }
            _ => {
                let f = |v: f64| self.base_h_first(u, v) - w;
                let (lo, hi) = (U_EPS * 1e-2, 1.0 - U_EPS * 1e-2);
                if f(lo) >= 0.0 {
                    lo
                } else if f(hi) <= 0.0 {
                    hi
                } else {
                    brent_root(f, lo, hi, 1e-13, 200).unwrap_or(0.5)
                }
            }
        };
        if v.is_nan() {
            0.5
        } else {
            v.clamp(0.0, 1.0)
        }
    }

    // ---- rotated public interface ----

    pub fn ln_density(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match self.rotation {
            Rotation::R0 => self.base_ln_pdf(u, v),
            Rotation::R90 => self.base_ln_pdf(1.0 - u, v),
            Rotation::R180 => self.base_ln_pdf(1.0 - u, 1.0 - v),
            Rotation::R270 => self.base_ln_pdf(u, 1.0 - v),
        }
    }

    pub fn density(&self, u: f64, v: f64) -> f64 {
        self.ln_density(u, v).exp()
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        let c = match self.rotation {
            Rotation::R0 => self.base_cdf(u, v),
            Rotation::R90 => v - self.base_cdf(1.0 - u, v),
            Rotation::R180 => u + v - 1.0 + self.base_cdf(1.0 - u, 1.0 - v),
            Rotation::R270 => u - self.base_cdf(u, 1.0 - v),
        };
        c.clamp((u + v - 1.0).max(0.0), u.min(v))
    }

    /// `P(V ≤ v | U = u) = ∂C(u, v)/∂u`.
    pub fn h_given_first(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match self.rotation {
            Rotation::R0 => self.base_h_first(u, v),
            Rotation::R90 => self.base_h_first(1.0 - u, v),
            Rotation::R180 => 1.0 - self.base_h_first(1.0 - u, 1.0 - v),
            Rotation::R270 => 1.0 - self.base_h_first(u, 1.0 - v),
        }
    }

    /// `P(U ≤ u | V = v) = ∂C(u, v)/∂v`.
    pub fn h_given_second(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (clamp_unit(u), clamp_unit(v));
        match self.rotation {
            Rotation::R0 => self.base_h_second(u, v),
            Rotation::R90 => 1.0 - self.base_h_second(1.0 - u, v),
            Rotation::R180 => 1.0 - self.base_h_second(1.0 - u, 1.0 - v),
            Rotation::R270 => self.base_h_second(u, 1.0 - v),
        }
    }

    /// `v` with `h_given_first(u, v) = w`.
    pub fn h_given_first_inverse(&self, u: f64, w: f64) -> f64 {
        let u = clamp_unit(u);
        let w = w.clamp(0.0, 1.0);
        match self.rotation {
            Rotation::R0 => self.base_h_first_inverse(u, w),
            Rotation::R90 => self.base_h_first_inverse(1.0 - u, w),
            Rotation::R180 => 1.0 - self.base_h_first_inverse(1.0 - u, 1.0 - w),
            Rotation::R270 => 1.0 - self.base_h_first_inverse(u, 1.0 - w),
        }
    }

    /// Draw `n` pairs by conditional inversion.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random_range(U_EPS..1.0 - U_EPS);
                let w: f64 = rng.random();
                (u, self.h_given_first_inverse(u, w))
            })
            .collect()
    }

    /// Model-implied Kendall's tau.
    pub fn kendall_tau(&self) -> f64 {
        let t = match self.family {
            CopulaFamily::Independence => 0.0,
            CopulaFamily::Gaussian | CopulaFamily::StudentT => 2.0 / PI * self.p(0).asin(),
            CopulaFamily::Clayton => self.p(0) / (self.p(0) + 2.0),
            CopulaFamily::Gumbel => 1.0 - 1.0 / self.p(0),
            CopulaFamily::Frank => frank_tau(self.p(0)),
            CopulaFamily::Joe => joe_tau(self.p(0)),
            CopulaFamily::Tawn2 => ev_tau(self.p(0), self.p(1)),
        };
        if self.rotation.negates() {
            -t
        } else {
            t
        }
    }

    /// `(λ_lower, λ_upper)` from the closed forms.
    pub fn tail_coefficients(&self) -> (f64, f64) {
        let (lower, upper) = match self.family {
            CopulaFamily::Independence | CopulaFamily::Gaussian | CopulaFamily::Frank => (0.0, 0.0),
            CopulaFamily::StudentT => {
                let (r, nu) = (self.p(0), self.p(1));
                let l = 2.0 * student_t_cdf(-((nu + 1.0) * (1.0 - r) / (1.0 + r)).sqrt(), nu + 1.0);
                (l, l)
            }
            CopulaFamily::Clayton => (2f64.powf(-1.0 / self.p(0)), 0.0),
            CopulaFamily::Gumbel | CopulaFamily::Joe => (0.0, 2.0 - 2f64.powf(1.0 / self.p(0))),
            CopulaFamily::Tawn2 => {
                let (t, d) = (self.p(0), self.p(1));
                (0.0, 1.0 + d - (1.0 + d.powf(t)).powf(1.0 / t))
            }
        };
        match self.rotation {
            Rotation::R0 => (lower, upper),
            Rotation::R180 => (upper, lower),
            // dependence sits in the off-diagonal corners
            Rotation::R90 | Rotation::R270 => (0.0, 0.0),
        }
    }

    pub fn loglik(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).map(|(&a, &b)| self.ln_density(a, b)).sum()
    }
}

/// Frank tau `1 - 4/θ (1 - D_1(θ))` with the Debye integral done numerically.
fn frank_tau(theta: f64) -> f64 {
    if theta.abs() < 1e-8 {
        return theta / 9.0;
    }
    let a = theta.abs();
    let debye = integrate(|t| if t == 0.0 { 1.0 } else { t / t.exp_m1() }, 0.0, a, 1e-15, 1e-13) / a;
    let tau = 1.0 - 4.0 / a * (1.0 - debye);
    tau.copysign(theta)
}

fn joe_tau(theta: f64) -> f64 {
    if theta == 1.0 {
        return 0.0;
    }
    // 1 - 4 Σ_k 1 / (k (θk + 2)(θ(k-1) + 2))
    let n = 20_000;
    let mut s = 0.0;
    for k in 1..=n {
        let k = k as f64;
        s += 1.0 / (k * (theta * k + 2.0) * (theta * (k - 1.0) + 2.0));
    }
    // remainder ≈ Σ_{k>n} 1/(θ² k³)
    let n = n as f64 + 0.5;
    s += 1.0 / (2.0 * theta * theta * n * n);
    1.0 - 4.0 * s
}

/// Extreme-value tau `∫ t(1-t) A''(t) / A(t) dt` with Pickands function
/// `A(t) = ℓ(1 - t, t)`.
fn ev_tau(theta: f64, delta: f64) -> f64 {
    if theta == 1.0 || delta == 0.0 {
        return 0.0;
    }
    let dt = delta.powf(theta);
    let f = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            return 0.0;
        }
        let s = (1.0 - t).powf(theta) + dt * t.powf(theta);
        let a = (1.0 - delta) * t + s.powf(1.0 / theta);
        let a2 = (theta - 1.0) * dt * (t * (1.0 - t)).powf(theta - 2.0) * s.powf(1.0 / theta - 2.0);
        t * (1.0 - t) * a2 / a
    };
    // split to let the quadrature resolve the endpoint behaviour
    let pts = [0.0, 1e-6, 1e-3, 0.05, 0.5, 0.95, 1.0 - 1e-3, 1.0 - 1e-6, 1.0];
    pts.windows(2).map(|w| integrate(f, w[0], w[1], 1e-14, 1e-12)).sum()
}
