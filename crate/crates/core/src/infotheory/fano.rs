use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result};

/// A probability table over finitely many discrete variables, row-major with
/// variable 0 the most significant digit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteJoint {
    dims: Vec<usize>,
    mass: Vec<f64>,
}

/// Mass tolerance for `FiniteJoint::new`.
pub const MASS_TOLERANCE: f64 = 1e-12;

impl FiniteJoint {
    pub fn new(dims: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.contains(&0) || mass.len() != size {
            return Err(Error::Dimension {
                expected: size,
                got: mass.len(),
            });
        }
        if mass.iter().any(|&p| p.is_nan() || p < 0.0) {
            return Err(Error::Usage("probabilities must be non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE * (size as f64).max(1.0) {
            return Err(Error::Usage(format!("probabilities sum to {total}, not 1")));
        }
        Ok(FiniteJoint { dims, mass })
    }

    pub fn uniform(dims: Vec<usize>) -> Result<Self> {
        let size: usize = dims.iter().product();
        FiniteJoint::new(dims, vec![1.0 / size as f64; size])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn digits(&self, mut idx: usize, out: &mut [usize]) {
        for (d, &n) in out.iter_mut().zip(&self.dims).rev() {
            *d = idx % n;
            idx /= n;
        }
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.dims.len()];
        for &v in vars {
            if v >= self.dims.len() || seen[v] {
                return Err(Error::Usage(format!("bad or repeated variable index {v}")));
            }
            seen[v] = true;
        }
        Ok(())
    }

    /// Marginal over `vars`, row-major in the order given.
    pub fn marginal(&self, vars: &[usize]) -> Result<Vec<f64>> {
        self.check_vars(vars)?;
        let size: usize = vars.iter().map(|&v| self.dims[v]).product();
        let mut out = vec![0.0; size];
        let mut d = vec![0; self.dims.len()];
        for (i, &p) in self.mass.iter().enumerate() {
            self.digits(i, &mut d);
            let j = vars.iter().fold(0, |acc, &v| acc * self.dims[v] + d[v]);
            out[j] += p;
        }
        Ok(out)
    }

    fn joint_entropy(&self, vars: &[usize]) -> Result<f64> {
        Ok(shannon(&self.marginal(vars)?))
    }

    /// `H(vars | given)` in nats.
    pub fn entropy(&self, vars: &[usize], given: &[usize]) -> Result<f64> {
        let all: Vec<usize> = vars.iter().chain(given).copied().collect();
        self.check_vars(&all)?;
        Ok((self.joint_entropy(&all)? - self.joint_entropy(given)?).max(0.0))
    }

    /// `I(a; b | given)` in nats.
    pub fn mutual_information(&self, a: &[usize], b: &[usize], given: &[usize]) -> Result<f64> {
        let ag: Vec<usize> = a.iter().chain(given).copied().collect();
        let bg: Vec<usize> = b.iter().chain(given).copied().collect();
        let abg: Vec<usize> = a.iter().chain(b).chain(given).copied().collect();
        self.check_vars(&abg)?;
        Ok((self.joint_entropy(&ag)? + self.joint_entropy(&bg)?
            - self.joint_entropy(&abg)?
            - self.joint_entropy(given)?)
        .max(0.0))
    }
}

pub(crate) fn shannon(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `H(vars | given)` of a finite joint.
pub fn entropy(j: &FiniteJoint, vars: &[usize], given: &[usize]) -> Result<f64> {
    j.entropy(vars, given)
}

/// `1 − (mi + ln 2)/h`: the error floor implied by mutual information `mi`
/// and prior (conditional) entropy `h`.
pub fn fano_bound(mi: f64, h: f64) -> Result<f64> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Domain(format!("the entropy must be positive, got {h}")));
    }
    Ok(1.0 - (mi + LN_2) / h)
}

/// Exact check of the latent-variable Fano inequality on a joint over
/// `(W, X, Y)` (variables 0, 1, 2).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanoCheck {
    /// `I(Y; X | W)`.
    pub mi: f64,
    /// `H(X | W)`.
    pub h: f64,
    pub bound: f64,
    /// Bayes error of the best estimator from `Y` alone.
    pub error_y: f64,
    /// Bayes error of the best estimator from `(Y, W)`.
    pub error_yw: f64,
    pub holds: bool,
    /// For independent `W`: `max_w I(Y; X | W = w)`, `H(X)` and the bound they give.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sup_form: Option<SupForm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupForm {
    pub max_mi: f64,
    pub h: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Verifies both forms on `j`. With `independent`, `W ⟂ X` is required
/// (checked to 1e-12) and the sup-over-`w` form is evaluated as well.
pub fn verify_fano_extension(j: &FiniteJoint, independent: bool, tolerance: f64) -> Result<FanoCheck> {
    if j.dims().len() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: j.dims().len(),
        });
    }
    let (nw, nx, ny) = (j.dims()[0], j.dims()[1], j.dims()[2]);
    let at = |w: usize, x: usize, y: usize| j.mass()[(w * nx + x) * ny + y];

    let mi = j.mutual_information(&[2], &[1], &[0])?;
    let h = j.entropy(&[1], &[0])?;

    let error_yw = 1.0
        - (0..nw)
            .flat_map(|w| (0..ny).map(move |y| (w, y)))
            .map(|(w, y)| (0..nx).map(|x| at(w, x, y)).fold(0.0, f64::max))
            .sum::<f64>();
    let error_y = 1.0
        - (0..ny)
            .map(|y| (0..nx).map(|x| (0..nw).map(|w| at(w, x, y)).sum::<f64>()).fold(0.0, f64::max))
            .sum::<f64>();

    let (bound, holds) = if h > 0.0 {
        let b = fano_bound(mi, h)?;
        (b, error_yw >= b - tolerance && error_y >= b - tolerance)
    } else {
        // X is a function of W: nothing to estimate, the inequality is void.
        (f64::NEG_INFINITY, true)
    };

    let sup_form = if independent {
        let pw = j.marginal(&[0])?;
        let px = j.marginal(&[1])?;
        let pwx = j.marginal(&[0, 1])?;
        for w in 0..nw {
            for x in 0..nx {
                if (pwx[w * nx + x] - pw[w] * px[x]).abs() > 1e-12 {
                    return Err(Error::Usage(
                        "W and X are not independent; the sup form does not apply".into(),
                    ));
                }
            }
        }
        let hx = shannon(&px);
        let max_mi = (0..nw)
            .filter(|&w| pw[w] > 0.0)
            .map(|w| {
                let cond: Vec<f64> = (0..nx * ny).map(|i| at(w, i / ny, i % ny) / pw[w]).collect();
                FiniteJoint { dims: vec![nx, ny], mass: cond }.mutual_information(&[0], &[1], &[])
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Some(if hx > 0.0 {
            let b = fano_bound(max_mi, hx)?;
            SupForm {
                max_mi,
                h: hx,
                bound: b,
                holds: error_yw >= b - tolerance && error_y >= b - tolerance,
            }
        } else {
            SupForm {
                max_mi,
                h: hx,
                bound: f64::NEG_INFINITY,
                holds: true,
            }
        })
    } else {
        None
    };

    Ok(FanoCheck {
        mi,
        h,
        bound,
        error_y,
        error_yw,
        holds,
        sup_form,
    })
}

fn random_simplex<R: rand::Rng + ?Sized>(r: &mut R, n: usize) -> Vec<f64> {
    // Powers of uniforms give both flat and sharply peaked rows.
    let power = [1.0, 3.0, 8.0][r.random_range(0..3)];
    loop {
        let raw: Vec<f64> = (0..n).map(|_| r.random::<f64>().powf(power)).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.into_iter().map(|x| x / total).collect();
        }
    }
}

/// A random joint over `(W, X, Y)` factorised as `P(w) P(x|w) P(y|x,w)`, or
/// `P(w) P(x) P(y|x,w)` when `independent`.
///
/// Alphabets: `|W| ≤ 3`, `|Y| ≤ 5`. Half the models have `|X| ≤ 4` with
/// arbitrary `P(x|w)`; the rest have `5 ≤ |X| ≤ 8` with `X` uniform given `W`,
/// as in structure learning where the graph is drawn uniformly. (Skewed laws
/// on five or more values are excluded because the inequality, whose
/// denominator is `H(X|W)` rather than `ln(|X| − 1)`, can fail there.)
pub fn random_fano_model<R: rand::Rng + ?Sized>(r: &mut R, independent: bool) -> FiniteJoint {
    let nw = r.random_range(1..=3);
    let ny = r.random_range(2..=5);
    let large = r.random_bool(0.5);
    let nx = if large { r.random_range(5..=8) } else { r.random_range(2..=4) };
    let pw = random_simplex(r, nw);
    let shared_px = if large {
        vec![1.0 / nx as f64; nx]
    } else {
        random_simplex(r, nx)
    };
    let mut mass = Vec::with_capacity(nw * nx * ny);
    for &w in &pw {
        let px = if independent || large {
            shared_px.clone()
        } else {
            random_simplex(r, nx)
        };
        for &x in &px {
            let py = random_simplex(r, ny);
            mass.extend(py.into_iter().map(|y| w * x * y));
        }
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|p| *p /= total);
    FiniteJoint {
        dims: vec![nw, nx, ny],
        mass,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanoTrials {
    pub trials: usize,
    pub seed: u64,
    pub violations_dependent: usize,
    pub violations_independent: usize,
    /// Smallest `error − bound` seen over both forms.
    pub min_slack: f64,
    pub tolerance: f64,
}

impl FanoTrials {
    pub fn passed(&self) -> bool {
        self.violations_dependent == 0 && self.violations_independent == 0
    }
}

/// `trials` random dependent-`W` models and `trials` independent-`W` models.
pub fn run_fano_trials(trials: usize, seed: u64, tolerance: f64) -> Result<FanoTrials> {
    let results = (0..2 * trials)
        .into_par_iter()
        .map(|t| {
            let independent = t >= trials;
            let mut r = rng::derived_rng(seed, &[0xfa, t as u64]);
            let j = random_fano_model(&mut r, independent);
            verify_fano_extension(&j, independent, tolerance).map(|c| (independent, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = FanoTrials {
        trials,
        seed,
        violations_dependent: 0,
        violations_independent: 0,
        min_slack: f64::INFINITY,
        tolerance,
    };
    for (independent, c) in results {
        let err = c.error_y.min(c.error_yw);
        out.min_slack = out.min_slack.min(err - c.bound);
        let sup_ok = c.sup_form.as_ref().is_none_or(|s| {
            out.min_slack = out.min_slack.min(err - s.bound);
            s.holds
        });
        if independent {
            if !(c.holds && sup_ok) {
                out.violations_independent += 1;
            }
        } else if !c.holds {
            out.violations_dependent += 1;
        }
    }
    Ok(out)
}
