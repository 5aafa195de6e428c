//! Gumbel and t copulas with time-varying parameters, Fréchet margins, and
//! the simulation scenarios built from them.
//!
//! Samplers work with `−ln U` internally: Fréchet quantiles only need that
//! value, and it keeps full precision for `U` close to 1.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::sample::TimedObservation;

/// Positive stable variable with Laplace transform `exp(−s^a)`, `0 < a ≤ 1`
/// (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    if a == 1.0 {
        return 1.0;
    }
    let u: f64 = PI * rng.sample::<f64, _>(Open01);
    let e: f64 = rng.sample(Exp1);
    (a * u).sin() / u.sin().powf(1.0 / a) * (((1.0 - a) * u).sin() / e).powf((1.0 - a) / a)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda < 1.0 || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("Gumbel parameter {lambda} must be >= 1")));
    }
    Ok(())
}

fn gumbel_neglog<R: Rng + ?Sized>(d: usize, lambda: f64, rng: &mut R) -> Vec<f64> {
    if lambda == 1.0 {
        return (0..d).map(|_| rng.sample(Exp1)).collect();
    }
    let s = positive_stable(1.0 / lambda, rng);
    (0..d)
        .map(|_| (rng.sample::<f64, _>(Exp1) / s).powf(1.0 / lambda))
        .collect()
}

/// One draw from the `d`-variate Gumbel copula (Marshall–Olkin).
pub fn sample_gumbel<R: Rng + ?Sized>(d: usize, lambda: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    Ok(gumbel_neglog(d, lambda, rng).into_iter().map(|v| (-v).exp()).collect())
}

fn check_t(d: usize, nu: f64, rho: f64) -> Result<()> {
    if nu <= 0.0 || !nu.is_finite() {
        return Err(Error::InvalidParameter(format!("degrees of freedom {nu} must be > 0")));
    }
    let lower = -1.0 / (d as f64 - 1.0);
    if !(rho > lower && rho < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "correlation {rho} gives a singular or indefinite matrix in dimension {d}"
        )));
    }
    Ok(())
}

/// `P(T_ν > x)` for `x ≥ 0`.
fn t_upper(x: f64, nu: f64) -> f64 {
    0.5 * beta_reg(nu / 2.0, 0.5, nu / (nu + x * x))
}

/// Cdf of Student's t with `ν` degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> f64 {
    if x >= 0.0 {
        1.0 - t_upper(x, nu)
    } else {
        t_upper(-x, nu)
    }
}

fn student_t_neglog_cdf(x: f64, nu: f64) -> f64 {
    if x >= 0.0 {
        -(-t_upper(x, nu)).ln_1p()
    } else {
        -t_upper(-x, nu).ln()
    }
}

fn t_copula_neglog<R: Rng + ?Sized>(d: usize, nu: f64, rho: f64, rng: &mut R) -> Vec<f64> {
    let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let a = (1.0 - rho).sqrt();
    let c = ((1.0 + (d as f64 - 1.0) * rho).sqrt() - a) / d as f64;
    let common = c * eps.iter().sum::<f64>();
    let w = ChiSquared::new(nu).expect("validated degrees of freedom").sample(rng) / nu;
    let scale = w.sqrt();
    eps.iter()
        .map(|e| student_t_neglog_cdf((a * e + common) / scale, nu))
        .collect()
}

/// One draw from the t copula with equicorrelation `ρ`.
pub fn sample_t_copula<R: Rng + ?Sized>(d: usize, nu: f64, rho: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_t(d, nu, rho)?;
    Ok(t_copula_neglog(d, nu, rho, rng)
        .into_iter()
        .map(|v| (-v).exp())
        .collect())
}

/// Quantile of the Fréchet distribution `exp(−(x/scale)^{−α})`.
pub fn frechet_quantile(u: f64, alpha: f64, scale: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::InvalidParameter(format!("probability {u} outside (0, 1)")));
    }
    if !(alpha > 0.0 && scale > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Fréchet needs alpha > 0 and scale > 0, got {alpha} and {scale}"
        )));
    }
    Ok(scale * (-u.ln()).powf(-1.0 / alpha))
}

pub fn frechet_cdf(x: f64, alpha: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-(x / scale).powf(-alpha)).exp()
    }
}

/// A copula parameter as a function of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParameterPath {
    Constant { value: f64 },
    Linear { start: f64, end: f64 },
    /// `before` for `t ≤ at`, `after` for `t > at`.
    Jump { before: f64, after: f64, at: f64 },
    /// `inner` for `t ∈ (from, to]`, `outer` elsewhere.
    TwoJumps { outer: f64, inner: f64, from: f64, to: f64 },
}

impl ParameterPath {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Linear { start, end } => start + (end - start) * t,
            Self::Jump { before, after, at } => {
                if t <= at {
                    before
                } else {
                    after
                }
            }
            Self::TwoJumps {
                outer,
                inner,
                from,
                to,
            } => {
                if t > from && t <= to {
                    inner
                } else {
                    outer
                }
            }
        }
    }

    /// Smallest and largest value over `[0, 1]`.
    pub fn range(&self) -> (f64, f64) {
        let values = match *self {
            Self::Constant { value } => [value, value],
            Self::Linear { start, end } => [start, end],
            Self::Jump { before, after, .. } => [before, after],
            Self::TwoJumps { outer, inner, .. } => [outer, inner],
        };
        (values[0].min(values[1]), values[0].max(values[1]))
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            Self::Constant { value } => value.is_finite(),
            Self::Linear { start, end } => start.is_finite() && end.is_finite(),
            Self::Jump { before, after, at } => {
                before.is_finite() && after.is_finite() && (0.0..=1.0).contains(&at)
            }
            Self::TwoJumps {
                outer,
                inner,
                from,
                to,
            } => outer.is_finite() && inner.is_finite() && 0.0 <= from && from <= to && to <= 1.0,
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid parameter path {self:?}")))
        }
    }
}

/// Named models from the simulation study, indexed by their free parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Gumbel, `λ` linear from 2 to the parameter.
    GLinear,
    /// `t_2`, `ρ` linear from 0 to the parameter.
    TLinear,
    /// `t_2`, `ρ = 0` up to `t = 1/2`, the parameter afterwards.
    TJump,
    /// Gumbel, `λ = 2` up to `t = 1/2`, the parameter afterwards.
    #[serde(rename = "model_i")]
    ModelI,
    /// Gumbel, the parameter on `(1/3, 2/3]`, `λ = 2` elsewhere.
    #[serde(rename = "model_ii")]
    ModelII,
    /// `t_2`, the parameter on `(1/4, 3/4]`, `ρ = 0` elsewhere.
    #[serde(rename = "model_iii")]
    ModelIII,
    /// `t_2`, `ρ = 0` on `(1/4, 3/4]`, the parameter elsewhere.
    #[serde(rename = "model_iii_inv")]
    ModelIIIInv,
}

impl Model {
    pub fn copula(self, parameter: f64) -> Copula {
        use ParameterPath::*;
        let t2 = |rho| Copula::T { nu: 2.0, rho };
        match self {
            Model::GLinear => Copula::Gumbel {
                lambda: Linear {
                    start: 2.0,
                    end: parameter,
                },
            },
            Model::TLinear => t2(Linear {
                start: 0.0,
                end: parameter,
            }),
            Model::TJump => t2(Jump {
                before: 0.0,
                after: parameter,
                at: 0.5,
            }),
            Model::ModelI => Copula::Gumbel {
                lambda: Jump {
                    before: 2.0,
                    after: parameter,
                    at: 0.5,
                },
            },
            Model::ModelII => Copula::Gumbel {
                lambda: TwoJumps {
                    outer: 2.0,
                    inner: parameter,
                    from: 1.0 / 3.0,
                    to: 2.0 / 3.0,
                },
            },
            Model::ModelIII => t2(TwoJumps {
                outer: 0.0,
                inner: parameter,
                from: 0.25,
                to: 0.75,
            }),
            Model::ModelIIIInv => t2(TwoJumps {
                outer: parameter,
                inner: 0.0,
                from: 0.25,
                to: 0.75,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Copula {
    Gumbel { lambda: ParameterPath },
    T { nu: f64, rho: ParameterPath },
    Preset { model: Model, parameter: f64 },
}

impl Copula {
    /// Replaces presets by their explicit form.
    pub fn resolve(self) -> Copula {
        match self {
            Copula::Preset { model, parameter } => model.copula(parameter),
            other => other,
        }
    }
}

/// Transformation applied after the Fréchet quantile transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginTransform {
    #[default]
    None,
    /// Multiply the whole vector by `1 + sin(2πt)/2`.
    SineFactor,
    /// Replace coordinate `i ≥ 2` (1-based) by `(X_i + 1)·i`.
    ShiftScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Margins {
    pub alpha: f64,
    #[serde(default)]
    pub transform: MarginTransform,
}

pub fn sine_factor(t: f64) -> f64 {
    1.0 + (2.0 * PI * t).sin() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub d: usize,
    pub copula: Copula,
    pub margins: Margins,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("scenario needs n >= 1".into()));
        }
        if self.d < 2 {
            return Err(Error::DimensionTooSmall(self.d));
        }
        if !(self.margins.alpha > 0.0 && self.margins.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tail index {} must be > 0",
                self.margins.alpha
            )));
        }
        match self.copula.resolve() {
            Copula::Gumbel { lambda } => {
                lambda.validate()?;
                check_lambda(lambda.range().0)
            }
            Copula::T { nu, rho } => {
                rho.validate()?;
                let (lo, hi) = rho.range();
                if lo < 0.0 || hi >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "correlation path {rho:?} leaves [0, 1)"
                    )));
                }
                check_t(self.d, nu, lo)?;
                check_t(self.d, nu, hi)
            }
            Copula::Preset { .. } => unreachable!("resolved above"),
        }
    }
}

/// Observation `i` (1-based) at `t = i/n` is drawn from the stream
/// `(seed, i)`.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<Vec<TimedObservation>> {
    scenario.validate()?;
    let Scenario { n, d, margins, .. } = *scenario;
    let copula = scenario.copula.resolve();
    let obs = (1..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            let mut rng = substream(seed, &[i as u64]);
            let neglog = match copula {
                Copula::Gumbel { lambda } => gumbel_neglog(d, lambda.at(t), &mut rng),
                Copula::T { nu, rho } => t_copula_neglog(d, nu, rho.at(t), &mut rng),
                Copula::Preset { .. } => unreachable!("resolved above"),
            };
            let mut x: Vec<f64> = neglog.iter().map(|v| v.powf(-1.0 / margins.alpha)).collect();
            match margins.transform {
                MarginTransform::None => {}
                MarginTransform::SineFactor => {
                    let c = sine_factor(t);
                    x.iter_mut().for_each(|v| *v *= c);
                }
                MarginTransform::ShiftScale => {
                    for (j, v) in x.iter_mut().enumerate().skip(1) {
                        *v = (*v + 1.0) * (j + 1) as f64;
                    }
                }
            }
            TimedObservation { t, x }
        })
        .collect();
    Ok(obs)
}

/// Kendall's τ with a standard error from the U-statistic variance
/// (`4/n · Var(h₁)`). Quadratic in the sample size.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len();
    let mut h = vec![0.0; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = ((x[i] - x[j]) * (y[i] - y[j])).signum();
            h[i] += s;
            h[j] += s;
        }
    }
    let m = (n - 1) as f64;
    h.iter_mut().for_each(|v| *v /= m);
    let tau = h.iter().sum::<f64>() / n as f64;
    let var = h.iter().map(|v| (v - tau).powi(2)).sum::<f64>() / m;
    (tau, (4.0 * var / n as f64).sqrt())
}
