//! Damage laws, the shear-compression driving force and hardening
//! classification.

use std::fmt;

use crate::continuum::{isotropic_stress, ElasticModuli, SymTensor3};
use crate::error::{Error, Result};

/// Which pair of degradation/dissipation functions is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DamageModel {
    /// `a = (1-α)²`, `w = w11 α`.
    Model1,
    /// `a = (1-α)²`, `w = w11 α²`.
    Model2,
    /// `a = (1-α)^p`, `w = w11 (1 - (1-α)^(p/2))`.
    Model3 { p: f64 },
    /// `a = (1-α) / (1 + (k-1) α)`, `w = w11 α`.
    Model4 { k: f64 },
}

impl DamageModel {
    pub fn index(&self) -> u8 {
        match self {
            DamageModel::Model1 => 1,
            DamageModel::Model2 => 2,
            DamageModel::Model3 { .. } => 3,
            DamageModel::Model4 { .. } => 4,
        }
    }
}

impl fmt::Display for DamageModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DamageModel::Model1 => write!(f, "model 1"),
            DamageModel::Model2 => write!(f, "model 2"),
            DamageModel::Model3 { p } => write!(f, "model 3 (p = {p})"),
            DamageModel::Model4 { k } => write!(f, "model 4 (k = {k})"),
        }
    }
}

/// A damage model together with the scale of its local dissipation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DamageLaw {
    model: DamageModel,
    w11: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::DamageDomain { value: alpha })
    }
}

impl DamageLaw {
    pub fn new(model: DamageModel, w11: f64) -> Result<Self> {
        match model {
            DamageModel::Model3 { p } if !(p > 0.0 && p.is_finite()) => {
                return Err(Error::invalid("p", format!("model 3 needs p > 0, got {p}")));
            }
            DamageModel::Model4 { k } if !(k > 1.0 && k.is_finite()) => {
                return Err(Error::invalid("k", format!("model 4 needs k > 1, got {k}")));
            }
            _ => {}
        }
        if !(w11 > 0.0 && w11.is_finite()) {
            return Err(Error::invalid("w11", format!("w11 must be > 0, got {w11}")));
        }
        Ok(DamageLaw { model, w11 })
    }

    pub fn model(&self) -> DamageModel {
        self.model
    }

    /// Largest damage the minimizer may reach. Model 3 with `p < 2` has
    /// unbounded derivatives at full damage, which its minimizers never
    /// reach; iterates stop one rounding step short of 1 there so that the
    /// derivatives stay finite.
    pub fn upper_limit(&self) -> f64 {
        match self.model {
            DamageModel::Model3 { p } if p < 2.0 => 1.0 - 0.5 * f64::EPSILON,
            _ => 1.0,
        }
    }

    pub fn w11(&self) -> f64 {
        self.w11
    }

    /// `(a, a', a'')` at `alpha`.
    pub fn degradation(&self, alpha: f64) -> Result<(f64, f64, f64)> {
        check_alpha(alpha)?;
        Ok(self.degradation_unchecked(alpha))
    }

    /// `(w, w', w'')` at `alpha`.
    pub fn dissipation(&self, alpha: f64) -> Result<(f64, f64, f64)> {
        check_alpha(alpha)?;
        Ok(self.dissipation_unchecked(alpha))
    }

    pub(crate) fn degradation_unchecked(&self, alpha: f64) -> (f64, f64, f64) {
        let s = 1.0 - alpha;
        match self.model {
            DamageModel::Model1 | DamageModel::Model2 => (s * s, -2.0 * s, 2.0),
            DamageModel::Model3 { p } => (
                s.powf(p),
                -p * s.powf(p - 1.0),
                p * (p - 1.0) * s.powf(p - 2.0),
            ),
            DamageModel::Model4 { k } => {
                let d = 1.0 + (k - 1.0) * alpha;
                (s / d, -k / (d * d), 2.0 * k * (k - 1.0) / (d * d * d))
            }
        }
    }

    /// `a(y) - a(x)` without cancellation for nearby arguments.
    pub(crate) fn degradation_difference(&self, x: f64, y: f64) -> f64 {
        match self.model {
            DamageModel::Model1 | DamageModel::Model2 => (x - y) * (2.0 - x - y),
            DamageModel::Model3 { p } => power_difference(1.0 - x, x - y, p),
            DamageModel::Model4 { k } => {
                let (dx, dy) = (1.0 + (k - 1.0) * x, 1.0 + (k - 1.0) * y);
                k * (x - y) / (dx * dy)
            }
        }
    }

    /// `w(y) - w(x)` without cancellation for nearby arguments.
    pub(crate) fn dissipation_difference(&self, x: f64, y: f64) -> f64 {
        let w = self.w11;
        match self.model {
            DamageModel::Model1 | DamageModel::Model4 { .. } => w * (y - x),
            DamageModel::Model2 => w * (y - x) * (y + x),
            DamageModel::Model3 { p } => -w * power_difference(1.0 - x, x - y, 0.5 * p),
        }
    }

    pub(crate) fn dissipation_unchecked(&self, alpha: f64) -> (f64, f64, f64) {
        let w = self.w11;
        match self.model {
            DamageModel::Model1 | DamageModel::Model4 { .. } => (w * alpha, w, 0.0),
            DamageModel::Model2 => (w * alpha * alpha, 2.0 * w * alpha, 2.0 * w),
            DamageModel::Model3 { p } => {
                let h = 0.5 * p;
                let s = 1.0 - alpha;
                (
                    w * (1.0 - s.powf(h)),
                    w * h * s.powf(h - 1.0),
                    -w * h * (h - 1.0) * s.powf(h - 2.0),
                )
            }
        }
    }
}

/// `(s + delta)^p - s^p` for `s, s + delta >= 0`, accurate for small
/// `delta`.
fn power_difference(s: f64, delta: f64, p: f64) -> f64 {
    let t = s + delta;
    if s <= 0.0 || t <= 0.0 {
        return t.max(0.0).powf(p) - s.powf(p);
    }
    s.powf(p) * (p * (delta / s).ln_1p()).exp_m1()
}

/// Everything the damage functional needs besides the fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub moduli: ElasticModuli,
    pub law: DamageLaw,
    /// Scale of the gradient regularization (N/m³).
    pub w1: f64,
    /// Internal length (m).
    pub ell: f64,
    pub kappa: f64,
    /// Residual stiffness added to the degradation so that fully damaged
    /// elements keep a nonsingular stiffness.
    pub eta_r: f64,
}

impl MaterialParams {
    pub fn new(
        moduli: ElasticModuli,
        law: DamageLaw,
        w1: f64,
        ell: f64,
        kappa: f64,
        eta_r: f64,
    ) -> Result<Self> {
        if !(w1 > 0.0 && w1.is_finite()) {
            return Err(Error::invalid("w1", format!("w1 must be > 0, got {w1}")));
        }
        if !(ell > 0.0 && ell.is_finite()) {
            return Err(Error::invalid("ell", format!("ell must be > 0, got {ell}")));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("kappa", format!("kappa must be >= 0, got {kappa}")));
        }
        if !(0.0..0.01).contains(&eta_r) {
            return Err(Error::invalid(
                "eta_r",
                format!("eta_r must satisfy 0 <= eta_r < 0.01, got {eta_r}"),
            ));
        }
        Ok(MaterialParams {
            moduli,
            law,
            w1,
            ell,
            kappa,
            eta_r,
        })
    }

    /// `(a + eta_r, a', a'')`.
    pub fn effective_degradation(&self, alpha: f64) -> (f64, f64, f64) {
        let (a, da, dda) = self.law.degradation_unchecked(alpha);
        (a + self.eta_r, da, dda)
    }

    /// Coefficient of the gradient term of the damage functional.
    pub fn gradient_coefficient(&self) -> f64 {
        self.w1 * self.ell * self.ell
    }
}

/// `dev:dev - (2/3) kappa sph:sph` of a stress tensor.
pub fn shear_compression_measure(stress: &SymTensor3, kappa: f64) -> f64 {
    let (dev, sph) = stress.split();
    dev.contract(&dev) - 2.0 / 3.0 * kappa * sph.contract(&sph)
}

/// Damage driving force `H = (a_eff²)'(α) / E * [dev:dev - 2/3 κ sph:sph]`
/// evaluated on the undamaged stress `A0 eps`.
pub fn driving_force(eps: &SymTensor3, alpha: f64, params: &MaterialParams) -> Result<f64> {
    check_alpha(alpha)?;
    let sigma0 = isotropic_stress(eps, &params.moduli);
    let measure = shear_compression_measure(&sigma0, params.kappa);
    let (a, da, _) = params.effective_degradation(alpha);
    Ok(2.0 * a * da / params.moduli.young() * measure)
}

/// Closed grid interval `[start, end]` on which a hardening property holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardeningSample {
    pub alpha: f64,
    /// `w' a'' - w'' a'`; positive means strain hardening.
    pub strain: f64,
    /// `w' S'' - w'' S'` with `S = 1/a`; positive means stress softening.
    pub stress: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HardeningReport {
    pub model: DamageModel,
    pub samples: Vec<HardeningSample>,
    pub strain_hardening: Vec<Interval>,
    pub stress_softening: Vec<Interval>,
}

impl HardeningReport {
    fn last_alpha(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.alpha)
    }

    fn covers_all(&self, set: &[Interval]) -> bool {
        matches!(set, [only] if only.start == 0.0 && only.end == self.last_alpha())
    }

    pub fn strain_hardening_everywhere(&self) -> bool {
        self.covers_all(&self.strain_hardening)
    }

    pub fn stress_softening_everywhere(&self) -> bool {
        self.covers_all(&self.stress_softening)
    }

    /// Smallest sampled α from which stress softening holds up to the end
    /// of the grid, if the property holds on a single trailing interval.
    pub fn stress_softening_onset(&self) -> Option<f64> {
        match self.stress_softening.as_slice() {
            [only] if only.end == self.last_alpha() => Some(only.start),
            _ => None,
        }
    }
}

fn format_intervals(set: &[Interval]) -> String {
    if set.is_empty() {
        return "none".to_string();
    }
    set.iter()
        .map(|i| format!("[{:.4}, {:.4}]", i.start, i.end))
        .collect::<Vec<_>>()
        .join(" u ")
}

impl fmt::Display for HardeningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} ({} samples)", self.model, self.samples.len())?;
        if self.strain_hardening_everywhere() {
            writeln!(f, "strain hardening: on [0,1)")?;
        } else {
            writeln!(f, "strain hardening: {}", format_intervals(&self.strain_hardening))?;
        }
        if self.stress_softening_everywhere() {
            write!(f, "stress softening: on [0,1)")
        } else if let Some(onset) = self.stress_softening_onset() {
            write!(f, "stress softening: for alpha >= {onset:.4}")
        } else {
            write!(f, "stress softening: {}", format_intervals(&self.stress_softening))
        }
    }
}

fn intervals(samples: &[HardeningSample], holds: impl Fn(&HardeningSample) -> bool) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut open: Option<Interval> = None;
    for s in samples {
        if holds(s) {
            match open.as_mut() {
                Some(iv) => iv.end = s.alpha,
                None => {
                    open = Some(Interval {
                        start: s.alpha,
                        end: s.alpha,
                    })
                }
            }
        } else if let Some(iv) = open.take() {
            out.push(iv);
        }
    }
    out.extend(open);
    out
}

/// Sample the strain-hardening and stress-softening sign functions on the
/// grid `α_i = i / samples`, `i = 0..samples`.
pub fn classify_hardening(law: &DamageLaw, samples: usize) -> Result<HardeningReport> {
    if samples < 100 {
        return Err(Error::invalid("samples", format!("need at least 100, got {samples}")));
    }
    let grid: Vec<HardeningSample> = (0..samples)
        .map(|i| {
            let alpha = i as f64 / samples as f64;
            let (a, da, dda) = law.degradation_unchecked(alpha);
            let (_, dw, ddw) = law.dissipation_unchecked(alpha);
            // S = 1/a
            let ds = -da / (a * a);
            let dds = (2.0 * da * da - a * dda) / (a * a * a);
            HardeningSample {
                alpha,
                strain: dw * dda - ddw * da,
                stress: dw * dds - ddw * ds,
            }
        })
        .collect();
    Ok(HardeningReport {
        model: law.model(),
        strain_hardening: intervals(&grid, |s| s.strain > 0.0),
        stress_softening: intervals(&grid, |s| s.stress > 0.0),
        samples: grid,
    })
}
