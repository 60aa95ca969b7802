//! Gradient-noise models, seeded RNG streams, and synthetic regression data.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::NoiseError;
use crate::objective::SampledObjective;
use crate::point::{dot, Point};
use crate::scalar::Scalar;

/// A reproducible, replication-indexed RNG stream.
///
/// Streams with the same `seed` but different `stream_id` are independent;
/// the same pair reproduces the identical sequence bit-for-bit. Each
/// replication of a Monte Carlo experiment owns one stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// One draw from `scale * t(df)`, built as `N(0,1) / sqrt(χ²(df)/df)`.
pub fn sample_student_t<T: Scalar, R: Rng + ?Sized>(rng: &mut R, df: T, scale: T) -> T {
    assert!(df > T::zero() && scale > T::zero());
    let z = T::standard_normal(rng);
    let chi2 = T::chi_squared(rng, df);
    scale * z / (chi2 / df).sqrt()
}

/// The gradient-noise field `ξ(θ)`.
///
/// The i.i.d. kinds are independent of `θ` (semi-stochastic SGD); the
/// mini-batch kind resamples data indices and returns the centered
/// mini-batch gradient `(1/b) Σ_j [∇F(θ,Z_j) − ∇f(θ)]`.
#[derive(Clone)]
pub enum NoiseModel<T: Scalar> {
    None,
    GaussianIid { sigma: T },
    StudentTIid { df: T, scale: T },
    Minibatch(MinibatchNoise<T>),
}

#[derive(Clone)]
pub struct MinibatchNoise<T: Scalar> {
    objective: Arc<dyn SampledObjective<T>>,
    pub batch_size: usize,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn gaussian(sigma: T) -> Result<Self, NoiseError> {
        if sigma <= T::zero() || !sigma.is_finite() {
            return Err(NoiseError::InvalidParam(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self::GaussianIid { sigma })
    }

    pub fn student_t(df: T, scale: T) -> Result<Self, NoiseError> {
        if df <= T::zero() || !df.is_finite() {
            return Err(NoiseError::InvalidParam(format!(
                "df must be positive, got {df}"
            )));
        }
        if scale <= T::zero() || !scale.is_finite() {
            return Err(NoiseError::InvalidParam(format!(
                "scale must be positive, got {scale}"
            )));
        }
        Ok(Self::StudentTIid { df, scale })
    }

    pub fn minibatch(
        objective: Arc<dyn SampledObjective<T>>,
        batch_size: usize,
    ) -> Result<Self, NoiseError> {
        if batch_size == 0 {
            return Err(NoiseError::InvalidParam("batch_size must be >= 1".into()));
        }
        if batch_size > objective.n_samples() {
            return Err(NoiseError::InvalidParam(format!(
                "batch_size {} exceeds dataset size {}",
                batch_size,
                objective.n_samples()
            )));
        }
        Ok(Self::Minibatch(MinibatchNoise {
            objective,
            batch_size,
        }))
    }

    /// One realization of `ξ(θ)`, written into `out`.
    pub fn draw_into<R: Rng + ?Sized>(
        &self,
        theta: &[T],
        out: &mut [T],
        rng: &mut R,
    ) -> Result<(), NoiseError> {
        match self {
            NoiseModel::None => out.fill(T::zero()),
            NoiseModel::GaussianIid { sigma } => {
                for o in out.iter_mut() {
                    *o = *sigma * T::standard_normal(rng);
                }
            }
            NoiseModel::StudentTIid { df, scale } => {
                for o in out.iter_mut() {
                    *o = sample_student_t(rng, *df, *scale);
                }
            }
            NoiseModel::Minibatch(mb) => mb.draw_into(theta, out, rng)?,
        }
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(NoiseError::SampleGradFailure { index: i });
        }
        Ok(())
    }

    /// Allocating variant of [`draw_into`](Self::draw_into).
    pub fn draw<R: Rng + ?Sized>(
        &self,
        theta: &Point<T>,
        rng: &mut R,
    ) -> Result<Point<T>, NoiseError> {
        let mut out = vec![T::zero(); theta.dim()];
        self.draw_into(theta, &mut out, rng)?;
        Point::new(out).map_err(|_| NoiseError::NonFiniteDraw)
    }

    /// Second-moment noise constant: smallest `c` with
    /// `E^{1/2}|ξ(θ)|² ≤ c (1+|θ|)` for the i.i.d. kinds (`None` for
    /// data-driven noise, which is certified numerically instead).
    pub fn l_xi_second(&self, dim: usize) -> Option<T> {
        let d = T::from_usize(dim).unwrap();
        match self {
            NoiseModel::None => Some(T::zero()),
            NoiseModel::GaussianIid { sigma } => Some(*sigma * d.sqrt()),
            NoiseModel::StudentTIid { df, scale } => {
                let two = T::of_f64(2.0);
                if *df <= two {
                    return None;
                }
                let var = *scale * *scale * *df / (*df - two);
                Some((d * var).sqrt())
            }
            NoiseModel::Minibatch(_) => None,
        }
    }

    /// Fourth-moment noise constant: smallest `c` with
    /// `E|ξ(θ)|⁴ ≤ c (1+|θ|⁴)` for the i.i.d. kinds.
    pub fn l_xi_fourth(&self, dim: usize) -> Option<T> {
        let d = T::from_usize(dim).unwrap();
        match self {
            NoiseModel::None => Some(T::zero()),
            NoiseModel::GaussianIid { sigma } => {
                // E|ξ|⁴ = σ⁴ d (d+2) for a standard Gaussian vector
                let s4 = sigma.powi(4);
                Some(s4 * d * (d + T::of_f64(2.0)))
            }
            NoiseModel::StudentTIid { df, scale } => {
                let two = T::of_f64(2.0);
                let four = T::of_f64(4.0);
                if *df <= four {
                    return None;
                }
                let var = *scale * *scale * *df / (*df - two);
                // per-coordinate 4th moment of scale*t(df)
                let m4 = T::of_f64(3.0) * scale.powi(4) * *df * *df
                    / ((*df - two) * (*df - four));
                Some(d * m4 + d * (d - T::one()) * var * var)
            }
            NoiseModel::Minibatch(_) => None,
        }
    }

    /// One constant serving both moment roles (their maximum), matching how
    /// the bias bounds reuse a single `L_ξ`.
    pub fn l_xi(&self, dim: usize) -> Option<T> {
        let a = self.l_xi_second(dim)?;
        let b = self.l_xi_fourth(dim)?;
        Some(a.max(b))
    }

    pub fn describe(&self) -> String {
        match self {
            NoiseModel::None => "none".to_string(),
            NoiseModel::GaussianIid { sigma } => format!("gaussian_iid(sigma={sigma})"),
            NoiseModel::StudentTIid { df, scale } => {
                format!("student_t_iid(df={df},scale={scale})")
            }
            NoiseModel::Minibatch(mb) => format!("minibatch(b={})", mb.batch_size),
        }
    }
}

impl<T: Scalar> MinibatchNoise<T> {
    fn draw_into<R: Rng + ?Sized>(
        &self,
        theta: &[T],
        out: &mut [T],
        rng: &mut R,
    ) -> Result<(), NoiseError> {
        let m = self.objective.n_samples();
        let b = self.batch_size;
        let d = out.len();
        let mut sample_grad = vec![T::zero(); d];
        out.fill(T::zero());
        if b == m {
            // degenerate full batch: every index once, no resampling
            for j in 0..m {
                self.objective.per_sample_grad_into(theta, j, &mut sample_grad);
                for (o, &g) in out.iter_mut().zip(&sample_grad) {
                    *o += g;
                }
            }
        } else {
            for _ in 0..b {
                let j = rng.random_range(0..m);
                self.objective.per_sample_grad_into(theta, j, &mut sample_grad);
                for (o, &g) in out.iter_mut().zip(&sample_grad) {
                    *o += g;
                }
            }
        }
        let inv_b = T::from_usize(b).unwrap().recip();
        self.objective.grad_into(theta, &mut sample_grad);
        for (o, &g) in out.iter_mut().zip(&sample_grad) {
            *o = *o * inv_b - g;
        }
        Ok(())
    }
}

/// Metadata stored alongside a generated dataset.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DatasetMeta {
    pub m: usize,
    pub d: usize,
    pub noise_df: f64,
    pub seed: u64,
}

/// Synthetic linear-regression data: a fixed `±1/√d` design, uniform true
/// coefficients, and heavy-tailed responses.
#[derive(Clone, Debug)]
pub struct RegressionDataset<T> {
    /// `m x d` design, row-major
    x: Vec<T>,
    y: Vec<T>,
    theta_true: Point<T>,
    pub meta: DatasetMeta,
}

#[derive(Serialize, Deserialize)]
struct SidecarJson {
    m: usize,
    d: usize,
    noise_df: f64,
    seed: u64,
    theta_true: Vec<f64>,
}

impl<T: Scalar> RegressionDataset<T> {
    pub fn m(&self) -> usize {
        self.meta.m
    }

    pub fn d(&self) -> usize {
        self.meta.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.meta.d..(i + 1) * self.meta.d]
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn x_flat(&self) -> &[T] {
        &self.x
    }

    pub fn theta_true(&self) -> &Point<T> {
        &self.theta_true
    }

    /// `(1/m) Xᵀ y`
    pub fn xty_over_m(&self) -> Vec<T> {
        let (m, d) = (self.meta.m, self.meta.d);
        let mut acc = vec![T::zero(); d];
        for i in 0..m {
            let row = self.row(i);
            let yi = self.y[i];
            for (a, &xij) in acc.iter_mut().zip(row) {
                *a += xij * yi;
            }
        }
        let inv_m = T::from_usize(m).unwrap().recip();
        for a in acc.iter_mut() {
            *a *= inv_m;
        }
        acc
    }

    /// Largest eigenvalue of `(1/m) Xᵀ X`, computed in `f64`.
    pub fn design_lambda_max(&self) -> f64 {
        let (m, d) = (self.meta.m, self.meta.d);
        let mut gram = vec![0.0f64; d * d];
        for i in 0..m {
            let row = self.row(i);
            for a in 0..d {
                let xa = row[a].as_f64();
                for b in a..d {
                    gram[a * d + b] += xa * row[b].as_f64();
                }
            }
        }
        let inv_m = 1.0 / m as f64;
        for a in 0..d {
            for b in a..d {
                gram[a * d + b] *= inv_m;
                gram[b * d + a] = gram[a * d + b];
            }
        }
        let mat = nalgebra::DMatrix::from_row_slice(d, d, &gram);
        mat.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Write the data as CSV with header `y,x1,...,xd`.
    pub fn write_csv(&self, path: &Path) -> Result<(), NoiseError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(file, "y")?;
        for j in 1..=self.meta.d {
            write!(file, ",x{j}")?;
        }
        writeln!(file)?;
        for i in 0..self.meta.m {
            write!(file, "{}", self.y[i].as_f64())?;
            for &xij in self.row(i) {
                write!(file, ",{}", xij.as_f64())?;
            }
            writeln!(file)?;
        }
        file.flush()?;
        Ok(())
    }

    /// Write the sidecar JSON with the metadata and `θ_true`.
    pub fn write_meta_json(&self, path: &Path) -> Result<(), NoiseError> {
        let sidecar = SidecarJson {
            m: self.meta.m,
            d: self.meta.d,
            noise_df: self.meta.noise_df,
            seed: self.meta.seed,
            theta_true: self.theta_true.to_f64_vec(),
        };
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| NoiseError::Meta(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    /// Read a dataset back from its CSV and sidecar JSON.
    pub fn read(csv_path: &Path, meta_path: &Path) -> Result<Self, NoiseError> {
        let sidecar: SidecarJson =
            serde_json::from_str(&std::fs::read_to_string(meta_path)?)
                .map_err(|e| NoiseError::Meta(e.to_string()))?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(csv_path)?;
        let mut x = Vec::with_capacity(sidecar.m * sidecar.d);
        let mut y = Vec::with_capacity(sidecar.m);
        for record in reader.records() {
            let record = record?;
            if record.len() != sidecar.d + 1 {
                return Err(NoiseError::Meta(format!(
                    "expected {} columns, got {}",
                    sidecar.d + 1,
                    record.len()
                )));
            }
            let parse = |s: &str| -> Result<T, NoiseError> {
                s.parse::<f64>()
                    .map(T::of_f64)
                    .map_err(|e| NoiseError::Meta(format!("bad number {s:?}: {e}")))
            };
            y.push(parse(&record[0])?);
            for j in 1..record.len() {
                x.push(parse(&record[j])?);
            }
        }
        if y.len() != sidecar.m {
            return Err(NoiseError::Meta(format!(
                "expected {} rows, got {}",
                sidecar.m,
                y.len()
            )));
        }
        let theta_true = Point::new(sidecar.theta_true.iter().map(|&v| T::of_f64(v)).collect())
            .map_err(|_| NoiseError::Meta("non-finite theta_true".into()))?;
        Ok(Self {
            x,
            y,
            theta_true,
            meta: DatasetMeta {
                m: sidecar.m,
                d: sidecar.d,
                noise_df: sidecar.noise_df,
                seed: sidecar.seed,
            },
        })
    }
}

/// Generate the regression data: design entries `±1/√d` with equal
/// probability, `(θ_true)_i ~ Unif(0,1)`, responses
/// `y_i = ⟨x_i, θ_true⟩ + ε` with `ε ~ t(noise_df)`.
///
/// Draw order is fixed (θ_true, then X row-major, then the response noise)
/// so a `(seed, stream_id)` pair pins the dataset exactly.
pub fn gen_regression_data<T: Scalar>(
    m: usize,
    d: usize,
    noise_df: T,
    stream: &RngStream,
) -> RegressionDataset<T> {
    assert!(m >= 1 && d >= 1, "need m, d >= 1");
    let mut rng = stream.rng();
    let theta_true: Vec<T> = (0..d).map(|_| T::unit_uniform(&mut rng)).collect();
    let scale = T::from_usize(d).unwrap().sqrt().recip();
    let mut x = Vec::with_capacity(m * d);
    for _ in 0..m * d {
        let sign = if rng.random::<bool>() { scale } else { -scale };
        x.push(sign);
    }
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let mean = dot(&x[i * d..(i + 1) * d], &theta_true);
        y.push(mean + sample_student_t(&mut rng, noise_df, T::one()));
    }
    RegressionDataset {
        x,
        y,
        theta_true: Point::new(theta_true).expect("uniform draws are finite"),
        meta: DatasetMeta {
            m,
            d,
            noise_df: noise_df.as_f64(),
            seed: stream.seed,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_reproduce_and_differ() {
        let a: Vec<f64> = {
            let mut rng = RngStream::new(7, 3).rng();
            (0..32).map(|_| f64::standard_normal(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = RngStream::new(7, 3).rng();
            (0..32).map(|_| f64::standard_normal(&mut rng)).collect()
        };
        let c: Vec<f64> = {
            let mut rng = RngStream::new(7, 4).rng();
            (0..32).map(|_| f64::standard_normal(&mut rng)).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn student_t_variance_matches_formula() {
        // df = 10: Var = df/(df-2) = 1.25, checked within 3 standard errors
        let mut rng = RngStream::new(11, 0).rng();
        let n = 1_000_000usize;
        let df = 10.0f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let v = sample_student_t(&mut rng, df, 1.0);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let target = df / (df - 2.0);
        // SE of the sample variance of t(10): sqrt((m4 - var^2)/n),
        // m4 = 3 df^2 / ((df-2)(df-4)) = 6.25
        let m4 = 3.0 * df * df / ((df - 2.0) * (df - 4.0));
        let se = ((m4 - target * target) / n as f64).sqrt();
        assert!(
            (var - target).abs() <= 3.0 * se,
            "var {var} vs {target} (se {se})"
        );
    }

    #[test]
    fn student_t_median_near_zero() {
        let mut rng = RngStream::new(5, 0).rng();
        let n = 100_000usize;
        let mut draws: Vec<f64> = (0..n).map(|_| sample_student_t(&mut rng, 5.0, 1.0)).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = draws[n / 2];
        // SE of the median ~ 1/(2 f(0) sqrt(n)) with f(0) ≈ 0.3796 for t(5)
        let se = 1.0 / (2.0 * 0.3796 * (n as f64).sqrt());
        assert!(median.abs() <= 3.0 * se, "median {median} (se {se})");
    }

    #[test]
    fn dataset_entries_and_columns() {
        let ds = gen_regression_data::<f64>(5000, 10, 10.0, &RngStream::new(1, 0));
        let target = 1.0 / 10f64.sqrt();
        assert!(ds.x_flat().iter().all(|&v| (v.abs() - target).abs() < 1e-15));
        let mean_true: f64 =
            ds.theta_true().as_slice().iter().sum::<f64>() / ds.d() as f64;
        assert!(mean_true > 0.2 && mean_true < 0.8, "mean {mean_true}");
        // column means of X within 4/sqrt(m) of zero
        let bound = 4.0 / (ds.m() as f64).sqrt();
        for j in 0..ds.d() {
            let col_mean: f64 =
                (0..ds.m()).map(|i| ds.row(i)[j]).sum::<f64>() / ds.m() as f64;
            assert!(col_mean.abs() <= bound, "column {j} mean {col_mean}");
        }
    }

    #[test]
    fn gaussian_noise_mean_zero() {
        let model = NoiseModel::gaussian(1.0f64).unwrap();
        let mut rng = RngStream::new(3, 0).rng();
        let d = 10;
        let theta = Point::zeros(d);
        let n = 100_000usize;
        let mut acc = vec![0.0f64; d];
        let mut buf = vec![0.0f64; d];
        for _ in 0..n {
            model.draw_into(&theta, &mut buf, &mut rng).unwrap();
            for (a, &b) in acc.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        let mean_norm = (acc.iter().map(|a| (a / n as f64).powi(2)).sum::<f64>()).sqrt();
        assert!(mean_norm <= 0.05, "mean norm {mean_norm}");
    }

    #[test]
    fn none_noise_is_zero() {
        let model: NoiseModel<f64> = NoiseModel::None;
        let mut rng = RngStream::new(1, 0).rng();
        let p = model.draw(&Point::zeros(3), &mut rng).unwrap();
        assert!(p.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn l_xi_values() {
        let g = NoiseModel::gaussian(1.0f64).unwrap();
        assert!((g.l_xi_second(10).unwrap() - 10f64.sqrt()).abs() < 1e-12);
        assert!((g.l_xi_fourth(10).unwrap() - 120.0).abs() < 1e-12);
        let t = NoiseModel::student_t(5.0f64, 1.0).unwrap();
        assert!(t.l_xi_fourth(10).is_some());
        let t4 = NoiseModel::student_t(4.0f64, 1.0).unwrap();
        assert!(t4.l_xi_fourth(10).is_none(), "df <= 4 has no 4th moment");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_regression_data::<f64>(50, 4, 10.0, &RngStream::new(9, 0));
        let csv_path = dir.path().join("data.csv");
        let meta_path = dir.path().join("data.meta.json");
        ds.write_csv(&csv_path).unwrap();
        ds.write_meta_json(&meta_path).unwrap();
        let back = RegressionDataset::<f64>::read(&csv_path, &meta_path).unwrap();
        assert_eq!(back.meta, ds.meta);
        assert_eq!(back.x_flat(), ds.x_flat());
        assert_eq!(back.y(), ds.y());
        assert_eq!(back.theta_true().as_slice(), ds.theta_true().as_slice());
    }
}
