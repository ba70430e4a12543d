//! Pauli-basis state tomography: simulated counts, linear inversion,
//! maximum-likelihood reconstruction and resampling error bars.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};
use crate::pulse::{confuse, Confusion};
use crate::qlin::{c, hermitian_eigenvalues, qubits_for_dim, CMatrix, CVector, DensityMatrix, C64};

/// Single-qubit measurement basis. Outcome 0 is the +1 eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    pub fn eigenvector(self, outcome: usize) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = if outcome == 0 { 1.0 } else { -1.0 };
        match self {
            Basis::Z if outcome == 0 => [c(1.0, 0.0), c(0.0, 0.0)],
            Basis::Z => [c(0.0, 0.0), c(1.0, 0.0)],
            Basis::X => [c(h, 0.0), c(s * h, 0.0)],
            Basis::Y => [c(h, 0.0), c(0.0, s * h)],
        }
    }

    pub fn pauli(self) -> CMatrix {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let vals = match self {
            Basis::X => [z, one, one, z],
            Basis::Y => [z, c(0.0, -1.0), c(0.0, 1.0), z],
            Basis::Z => [one, z, z, -one],
        };
        CMatrix::from_row_slice(2, 2, &vals)
    }

    fn letter(self) -> char {
        match self {
            Basis::X => 'X',
            Basis::Y => 'Y',
            Basis::Z => 'Z',
        }
    }
}

/// One basis per qubit, atom first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MeasurementSetting {
    bases: Vec<Basis>,
}

impl MeasurementSetting {
    pub fn new(bases: Vec<Basis>) -> Result<Self> {
        qubits_for_dim(1usize << bases.len())?;
        if bases.is_empty() {
            return Err(Error::InvalidParameter {
                name: "setting".into(),
                reason: "needs at least one qubit".into(),
            });
        }
        Ok(Self { bases })
    }

    /// All `3^n` settings in lexicographic X < Y < Z order.
    pub fn all(qubits: usize) -> Vec<MeasurementSetting> {
        let mut out = vec![Vec::new()];
        for _ in 0..qubits {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Basis>| {
                    Basis::ALL.iter().map(move |&b| {
                        let mut v = prefix.clone();
                        v.push(b);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(|bases| Self { bases }).collect()
    }

    pub fn bases(&self) -> &[Basis] {
        &self.bases
    }

    pub fn qubits(&self) -> usize {
        self.bases.len()
    }

    pub fn outcomes(&self) -> usize {
        1 << self.bases.len()
    }

    /// Rank-1 projector vector for a joint outcome index.
    pub fn outcome_vector(&self, outcome: usize) -> CVector {
        let n = self.qubits();
        let mut v = CVector::from_element(1, c(1.0, 0.0));
        for (q, b) in self.bases.iter().enumerate() {
            let bit = (outcome >> (n - 1 - q)) & 1;
            let e = b.eigenvector(bit);
            v = v.kronecker(&CVector::from_column_slice(&e));
        }
        v
    }

    pub fn outcome_vectors(&self) -> Vec<CVector> {
        (0..self.outcomes())
            .map(|i| self.outcome_vector(i))
            .collect()
    }

    pub fn projectors(&self) -> Vec<CMatrix> {
        self.outcome_vectors()
            .iter()
            .map(|v| v * v.adjoint())
            .collect()
    }

    pub fn label(&self) -> String {
        self.bases.iter().map(|b| b.letter()).collect()
    }
}

impl fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for MeasurementSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bases = s
            .chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'X' => Ok(Basis::X),
                'Y' => Ok(Basis::Y),
                'Z' => Ok(Basis::Z),
                other => Err(Error::InvalidParameter {
                    name: "setting".into(),
                    reason: format!("unknown basis letter '{other}'"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bases)
    }
}

impl Serialize for MeasurementSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for MeasurementSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome counts for one setting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CountsRecord {
    pub setting: MeasurementSetting,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl CountsRecord {
    pub fn new(setting: MeasurementSetting, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != setting.outcomes() {
            return Err(Error::DimensionMismatch {
                expected: setting.outcomes(),
                actual: counts.len(),
            });
        }
        let total = counts.iter().sum();
        Ok(Self {
            setting,
            counts,
            total,
        })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        if self.total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&n| n as f64 / self.total as f64)
            .collect()
    }
}

impl<'de> Deserialize<'de> for CountsRecord {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            setting: MeasurementSetting,
            counts: Vec<u64>,
            total: Option<u64>,
        }
        let raw = Raw::deserialize(d)?;
        let rec = CountsRecord::new(raw.setting, raw.counts).map_err(serde::de::Error::custom)?;
        if let Some(t) = raw.total {
            if t != rec.total {
                return Err(serde::de::Error::custom(format!(
                    "total {t} does not match the summed counts {}",
                    rec.total
                )));
            }
        }
        Ok(rec)
    }
}

/// `p_i = ⟨v_i|ρ|v_i⟩`, clamped at zero and renormalized.
pub fn born_probabilities(rho: &DensityMatrix, s: &MeasurementSetting) -> Result<Vec<f64>> {
    born_raw(rho.matrix(), s)
}

pub(crate) fn born_raw(m: &CMatrix, s: &MeasurementSetting) -> Result<Vec<f64>> {
    if m.nrows() != s.outcomes() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            actual: s.outcomes(),
        });
    }
    let mut p: Vec<f64> = s
        .outcome_vectors()
        .iter()
        .map(|v| v.dotc(&(m * v)).re.max(0.0))
        .collect();
    let total: f64 = p.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    for x in &mut p {
        *x /= total;
    }
    Ok(p)
}

/// Multinomial sample of `shots` outcomes.
pub fn sample_multinomial<R: Rng + ?Sized>(rng: &mut R, probs: &[f64], shots: u64) -> Vec<u64> {
    let mut left = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        if i + 1 == probs.len() {
            out.push(left);
            break;
        }
        let k = if left == 0 || mass <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}

/// Draws counts for each setting, optionally through a symmetric analyzer
/// flip `confusion` on every qubit.
pub fn simulate_counts<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    settings: &[MeasurementSetting],
    shots_per_setting: u64,
    rng: &mut R,
    confusion: Option<f64>,
) -> Result<Vec<CountsRecord>> {
    if shots_per_setting == 0 {
        return Err(Error::InvalidParameter {
            name: "shots_per_setting".into(),
            reason: "must be at least 1".into(),
        });
    }
    if let Some(e) = confusion {
        check_probability("confusion", e)?;
    }
    settings
        .iter()
        .map(|s| {
            let mut p = born_probabilities(rho, s)?;
            if let Some(e) = confusion {
                p = confuse(&p, &vec![Confusion::symmetric(e); s.qubits()]);
            }
            CountsRecord::new(s.clone(), sample_multinomial(rng, &p, shots_per_setting))
        })
        .collect()
}

/// Per-setting outcome frequencies with a statistical weight.
#[derive(Debug, Clone)]
pub struct FrequencyData {
    pub setting: MeasurementSetting,
    pub freqs: Vec<f64>,
    pub weight: f64,
}

impl FrequencyData {
    pub fn from_records(records: &[CountsRecord]) -> Vec<FrequencyData> {
        records
            .iter()
            .map(|r| FrequencyData {
                setting: r.setting.clone(),
                freqs: r.frequencies(),
                weight: r.total as f64,
            })
            .collect()
    }

    /// Exact probabilities, equally weighted.
    pub fn exact(settings: &[MeasurementSetting], probs: &[Vec<f64>]) -> Vec<FrequencyData> {
        settings
            .iter()
            .zip(probs)
            .map(|(s, p)| FrequencyData {
                setting: s.clone(),
                freqs: p.clone(),
                weight: 1.0,
            })
            .collect()
    }
}

fn check_complete(data: &[FrequencyData]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::Incomplete("no records".into()))?;
    let n = first.setting.qubits();
    let mut seen = std::collections::BTreeSet::new();
    for d in data {
        if d.setting.qubits() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: d.setting.qubits(),
            });
        }
        if d.freqs.len() != d.setting.outcomes() {
            return Err(Error::DimensionMismatch {
                expected: d.setting.outcomes(),
                actual: d.freqs.len(),
            });
        }
        if d.weight > 0.0 {
            seen.insert(d.setting.clone());
        }
    }
    let missing: Vec<String> = MeasurementSetting::all(n)
        .into_iter()
        .filter(|s| !seen.contains(s))
        .map(|s| s.label())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Incomplete(format!(
            "missing settings {}",
            missing.join(",")
        )));
    }
    Ok(n)
}

/// Unconstrained Pauli-expansion estimate; Hermitian and unit trace, but
/// possibly with negative eigenvalues.
pub fn linear_inversion(records: &[CountsRecord]) -> Result<CMatrix> {
    linear_inversion_data(&FrequencyData::from_records(records))
}

pub fn linear_inversion_data(data: &[FrequencyData]) -> Result<CMatrix> {
    let n = check_complete(data)?;
    let dim = 1usize << n;
    let mut rho = CMatrix::zeros(dim, dim);
    // Pauli strings indexed in base 4: 0 = I, 1..=3 = X, Y, Z.
    for code in 0..4usize.pow(n as u32) {
        let ops: Vec<Option<Basis>> = (0..n)
            .map(|q| match (code / 4usize.pow((n - 1 - q) as u32)) % 4 {
                0 => None,
                k => Some(Basis::ALL[k - 1]),
            })
            .collect();
        let (mut sum, mut count) = (0.0, 0usize);
        for d in data.iter().filter(|d| d.weight > 0.0) {
            let compatible = ops
                .iter()
                .zip(d.setting.bases())
                .all(|(o, b)| o.is_none_or(|o| o == *b));
            if !compatible {
                continue;
            }
            let ev: f64 = d
                .freqs
                .iter()
                .enumerate()
                .map(|(i, &f)| {
                    let flips = ops
                        .iter()
                        .enumerate()
                        .filter(|(q, o)| o.is_some() && (i >> (n - 1 - q)) & 1 == 1)
                        .count();
                    if flips % 2 == 0 {
                        f
                    } else {
                        -f
                    }
                })
                .sum();
            sum += ev;
            count += 1;
        }
        let expectation = sum / count as f64;
        let mut op = CMatrix::identity(1, 1);
        for o in &ops {
            let m = o.map_or_else(|| CMatrix::identity(2, 2), |b| b.pauli());
            op = op.kronecker(&m);
        }
        rho += op * c(expectation, 0.0);
    }
    Ok(rho * c(1.0 / dim as f64, 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub dilution: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            tol: 1e-10,
            dilution: 0.1,
        }
    }
}

impl MleOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter".into(),
                reason: "must be at least 1".into(),
            });
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol".into(),
                reason: "must be >= 0".into(),
            });
        }
        check_probability("dilution", self.dilution)?;
        if self.dilution >= 1.0 {
            return Err(Error::InvalidParameter {
                name: "dilution".into(),
                reason: "must be below 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub rho: DensityMatrix,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// False if any accepted step lowered the likelihood.
    pub monotone: bool,
    pub mc_std: BTreeMap<String, f64>,
}

pub const PROBABILITY_FLOOR: f64 = 1e-12;

struct Problem {
    vectors: Vec<CVector>,
    weights: Vec<f64>,
    dim: usize,
}

impl Problem {
    fn new(data: &[FrequencyData]) -> Result<Self> {
        let n = check_complete(data)?;
        let total: f64 = data.iter().map(|d| d.weight).sum();
        let mut vectors = Vec::new();
        let mut weights = Vec::new();
        for d in data {
            let vs = d.setting.outcome_vectors();
            for (v, &f) in vs.into_iter().zip(&d.freqs) {
                let w = f * d.weight / total;
                if w > 0.0 {
                    vectors.push(v);
                    weights.push(w);
                }
            }
        }
        Ok(Self {
            vectors,
            weights,
            dim: 1 << n,
        })
    }

    fn probs(&self, rho: &CMatrix) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|v| v.dotc(&(rho * v)).re.max(PROBABILITY_FLOOR))
            .collect()
    }

    fn log_likelihood(&self, probs: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(probs)
            .map(|(w, p)| w * p.ln())
            .sum()
    }

    fn r_operator(&self, probs: &[f64]) -> CMatrix {
        let mut r = CMatrix::zeros(self.dim, self.dim);
        for ((v, w), p) in self.vectors.iter().zip(&self.weights).zip(probs) {
            r += (v * v.adjoint()) * c(w / p, 0.0);
        }
        r
    }
}

fn normalize(m: &CMatrix) -> CMatrix {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let tr = h.trace().re;
    h * c(1.0 / tr, 0.0)
}

/// Diluted `RρR` maximum-likelihood iteration.
pub fn mle_reconstruct(
    records: &[CountsRecord],
    opts: &MleOptions,
) -> Result<ReconstructionReport> {
    mle_data(&FrequencyData::from_records(records), opts, None)
}

/// Maximum-likelihood estimate from frequency data, optionally warm-started.
pub fn mle_data(
    data: &[FrequencyData],
    opts: &MleOptions,
    start: Option<&DensityMatrix>,
) -> Result<ReconstructionReport> {
    opts.validate()?;
    let prob = Problem::new(data)?;
    let mut rho = match start {
        Some(s) if s.dim() == prob.dim => {
            // keep the start full rank so that no outcome is stuck at zero
            let mix = CMatrix::identity(prob.dim, prob.dim) * c(1.0 / prob.dim as f64, 0.0);
            s.matrix() * c(0.99, 0.0) + mix * c(0.01, 0.0)
        }
        _ => CMatrix::identity(prob.dim, prob.dim) * c(1.0 / prob.dim as f64, 0.0),
    };
    let mut p = prob.probs(&rho);
    let mut ll = prob.log_likelihood(&p);
    let mut converged = false;
    let mut monotone = true;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let r = prob.r_operator(&p);
        let rrr = &r * &rho * &r;
        let mut d = opts.dilution;
        let mut accepted = None;
        for _ in 0..40 {
            let cand = normalize(&(&rrr * c(1.0 - d, 0.0) + &rho * c(d, 0.0)));
            let cp = prob.probs(&cand);
            let cll = prob.log_likelihood(&cp);
            if cll >= ll {
                accepted = Some((cand, cp, cll));
                break;
            }
            d = 0.5 * (1.0 + d);
        }
        let Some((cand, cp, cll)) = accepted else {
            converged = true;
            break;
        };
        if cll < ll {
            monotone = false;
        }
        let gain = cll - ll;
        rho = cand;
        p = cp;
        ll = cll;
        if gain < opts.tol {
            converged = true;
            break;
        }
    }
    let rho = DensityMatrix::from_matrix(normalize(&rho))
        .or_else(|_| DensityMatrix::from_matrix(project_psd(&rho)))?;
    Ok(ReconstructionReport {
        rho,
        log_likelihood: ll,
        iterations,
        converged,
        monotone,
        mc_std: BTreeMap::new(),
    })
}

/// Nearest unit-trace PSD matrix by eigenvalue clipping.
pub fn project_psd(m: &CMatrix) -> CMatrix {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = vals.iter().sum();
    for v in &mut vals {
        *v /= s;
    }
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c(v, 0.0)),
    ));
    let out = &eig.eigenvectors * d * eig.eigenvectors.adjoint();
    (&out + out.adjoint()) * c(0.5, 0.0)
}

/// Linear inversion when it is already physical, maximum likelihood
/// otherwise.
pub fn reconstruct_exact(
    data: &[FrequencyData],
    opts: &MleOptions,
) -> Result<(DensityMatrix, &'static str)> {
    let li = linear_inversion_data(data)?;
    if hermitian_eigenvalues(&li)[0] > -1e-10 {
        if let Ok(rho) = DensityMatrix::from_matrix(li) {
            return Ok((rho, "linear-inversion"));
        }
    }
    Ok((mle_data(data, opts, None)?.rho, "maximum-likelihood"))
}

/// Named scalar computed from a reconstructed state.
pub type Metric<'a> = (&'a str, &'a (dyn Fn(&DensityMatrix) -> f64 + Sync));

/// Bootstrap standard errors: each replica resamples every setting from
/// its observed frequencies and is reconstructed by maximum likelihood.
pub fn monte_carlo_errors(
    records: &[CountsRecord],
    metrics: &[Metric<'_>],
    resamples: usize,
    seed: u64,
    opts: &MleOptions,
) -> Result<BTreeMap<String, f64>> {
    if resamples < 2 {
        return Err(Error::InvalidParameter {
            name: "resamples".into(),
            reason: "at least 2 replicas are needed".into(),
        });
    }
    let base = mle_reconstruct(records, opts)?;
    let replica = |b: usize| -> Result<Vec<f64>> {
        let mut rng = crate::rng::stream(seed, &[crate::rng::tag("bootstrap"), b as u64]);
        let resampled = records
            .iter()
            .map(|r| {
                let f = r.frequencies();
                CountsRecord::new(r.setting.clone(), sample_multinomial(&mut rng, &f, r.total))
            })
            .collect::<Result<Vec<_>>>()?;
        let rep = mle_data(
            &FrequencyData::from_records(&resampled),
            opts,
            Some(&base.rho),
        )?;
        Ok(metrics.iter().map(|(_, f)| f(&rep.rho)).collect())
    };
    let values: Vec<Vec<f64>> = crate::par::map_indices(resamples, replica)
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(metrics
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let xs: Vec<f64> = values.iter().map(|v| v[k]).collect();
            (name.to_string(), sample_std(&xs))
        })
        .collect())
}

pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    var.max(0.0).sqrt()
}
