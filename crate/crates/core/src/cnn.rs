//! Convolutional reductions: patch matrices, the separable ReLU reduction,
//! nuclear-norm training of linear CNNs and the DFT-domain lasso for
//! circular CNNs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::numerics::vector::dot;
use crate::numerics::{dft, dft_matrix_apply};
use crate::solvers::{fista_complex_lasso, nuclear_dual_check, solve_nuclear, SolverConfig, SolverDiagnostics};
use crate::{ComplexMatrix, Error, Matrix, Result};

/// Patch matrices `X_1 … X_K`, each `n × d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchSet {
    patches: Vec<Matrix>,
}

impl PatchSet {
    pub fn new(patches: Vec<Matrix>) -> Result<Self> {
        let Some(first) = patches.first() else {
            return Err(Error::InvalidArgument("a patch set needs at least one patch".into()));
        };
        let shape = first.shape();
        if let Some((k, p)) = patches.iter().enumerate().find(|(_, p)| p.shape() != shape) {
            return Err(Error::Shape(format!(
                "patch {k} is {:?}, expected {:?}",
                p.shape(),
                shape
            )));
        }
        Ok(PatchSet { patches })
    }

    pub fn k(&self) -> usize {
        self.patches.len()
    }

    pub fn n(&self) -> usize {
        self.patches[0].rows()
    }

    pub fn d(&self) -> usize {
        self.patches[0].cols()
    }

    pub fn patches(&self) -> &[Matrix] {
        &self.patches
    }

    pub fn patch(&self, k: usize) -> &Matrix {
        &self.patches[k]
    }

    /// `[X_1 … X_K]`, `n × dK`.
    pub fn stacked(&self) -> Matrix {
        let d = self.d();
        Matrix::from_fn(self.n(), d * self.k(), |i, c| self.patches[c / d][(i, c % d)])
    }

    /// `Σ_k X_k z_k` for `Z = [z_1 … z_K]` (`d × K`).
    pub fn predict(&self, z: &Matrix) -> Result<Vec<f64>> {
        if z.shape() != (self.d(), self.k()) {
            return Err(Error::Shape(format!(
                "filter matrix is {:?}, expected {:?}",
                z.shape(),
                (self.d(), self.k())
            )));
        }
        let mut out = vec![0.0; self.n()];
        for (k, p) in self.patches.iter().enumerate() {
            let zk = z.column(k);
            for (o, t) in out.iter_mut().zip(p.matvec(&zk)) {
                *o += t;
            }
        }
        Ok(out)
    }

    /// `[X_1ᵀv … X_Kᵀv]`, `d × K`.
    pub fn adjoint(&self, v: &[f64]) -> Result<Matrix> {
        if v.len() != self.n() {
            return Err(Error::Shape(format!("{} samples but vector of length {}", self.n(), v.len())));
        }
        let mut out = Matrix::zeros(self.d(), self.k());
        for (k, p) in self.patches.iter().enumerate() {
            out.set_column(k, &p.tmatvec(v));
        }
        Ok(out)
    }
}

/// Flattened images (`N × C·H·W`, channel-major `c·H·W + row·W + col`) to
/// patch matrices, one per spatial position in row-major order. Patches are
/// flattened the same way, so `d = filter_h · filter_w · channels`.
pub fn extract_patches(
    images: &Matrix,
    height: usize,
    width: usize,
    channels: usize,
    filter_h: usize,
    filter_w: usize,
    stride: usize,
) -> Result<PatchSet> {
    let expected = height * width * channels;
    if images.cols() != expected {
        return Err(Error::Shape(format!(
            "images have {} columns, expected {height}·{width}·{channels} = {expected}",
            images.cols()
        )));
    }
    if stride == 0 || filter_h == 0 || filter_w == 0 || filter_h > height || filter_w > width {
        return Err(Error::Shape(format!(
            "filter {filter_h}×{filter_w} with stride {stride} does not fit a {height}×{width} image"
        )));
    }
    if (height - filter_h) % stride != 0 || (width - filter_w) % stride != 0 {
        return Err(Error::Shape(format!(
            "stride {stride} leaves partial patches: ({height} − {filter_h}) and ({width} − {filter_w}) must be multiples of the stride"
        )));
    }
    let rows = (height - filter_h) / stride + 1;
    let cols = (width - filter_w) / stride + 1;
    let d = filter_h * filter_w * channels;
    let mut patches = Vec::with_capacity(rows * cols);
    for pr in 0..rows {
        for pc in 0..cols {
            patches.push(Matrix::from_fn(images.rows(), d, |i, idx| {
                let c = idx / (filter_h * filter_w);
                let a = (idx / filter_w) % filter_h;
                let b = idx % filter_w;
                images[(i, c * height * width + (pr * stride + a) * width + pc * stride + b)]
            }));
        }
    }
    PatchSet::new(patches)
}

/// `X' = [X_1; …; X_K]` and `y' = [y_1; …; y_K]`, which turn the
/// patch-separable ReLU CNN into the fully connected program.
pub fn stack_separable(ps: &PatchSet, y_blocks: &[Vec<f64>]) -> Result<(Matrix, Vec<f64>)> {
    if y_blocks.len() != ps.k() {
        return Err(Error::Shape(format!("{} label blocks for {} patches", y_blocks.len(), ps.k())));
    }
    if let Some(b) = y_blocks.iter().find(|b| b.len() != ps.n()) {
        return Err(Error::Shape(format!("label block of length {} for {} samples", b.len(), ps.n())));
    }
    let mut x = ps.patches[0].clone();
    for p in &ps.patches[1..] {
        x = x.vstack(p)?;
    }
    Ok((x, y_blocks.concat()))
}

/// Nuclear-norm training of a linear CNN. Returns `Z`, the solver
/// diagnostics and `σ_max([X_kᵀv̂])` at `v̂ = y − Σ_k X_k z_k`.
pub fn train_linear_cnn(
    ps: &PatchSet,
    y: &[f64],
    beta: f64,
    cfg: &SolverConfig,
) -> Result<(Matrix, SolverDiagnostics, f64)> {
    let (z, diag) = solve_nuclear(ps, y, beta, cfg)?;
    let check = nuclear_dual_check(ps, y, beta, &z)?;
    Ok((z, diag, check.sigma_max))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DftNormalization {
    /// `X̃ = XF`; the equivalent lasso penalty is `β`.
    Unnormalized,
    /// `X̃ = XF/√d`; the equivalent lasso penalty is `β/√d`.
    #[default]
    Unitary,
}

/// Circular convolution with filters of length `h` zero-padded to the
/// signal length `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CirculantSpec {
    pub filter_len: usize,
    pub signal_len: usize,
    #[serde(default)]
    pub normalization: DftNormalization,
}

impl CirculantSpec {
    pub fn new(filter_len: usize, signal_len: usize, normalization: DftNormalization) -> Result<Self> {
        if filter_len == 0 || filter_len > signal_len {
            return Err(Error::InvalidArgument(format!(
                "filter length must be in 1..={signal_len}, got {filter_len}"
            )));
        }
        Ok(CirculantSpec {
            filter_len,
            signal_len,
            normalization,
        })
    }

    /// Lasso weight matching weight decay `β` on the circular CNN.
    pub fn penalty(&self, beta: f64) -> f64 {
        match self.normalization {
            DftNormalization::Unnormalized => beta,
            DftNormalization::Unitary => beta / (self.signal_len as f64).sqrt(),
        }
    }

    fn transform_scale(&self) -> f64 {
        match self.normalization {
            DftNormalization::Unnormalized => 1.0,
            DftNormalization::Unitary => 1.0 / (self.signal_len as f64).sqrt(),
        }
    }
}

/// `X̃ = XF` (scaled by `1/√d` for the unitary convention).
pub fn circulant_features(x: &Matrix, spec: &CirculantSpec) -> Result<ComplexMatrix> {
    if x.cols() != spec.signal_len {
        return Err(Error::Shape(format!(
            "data has {} columns, spec expects {}",
            x.cols(),
            spec.signal_len
        )));
    }
    Ok(dft_matrix_apply(x).scaled(spec.transform_scale()))
}

/// Circular patches `(X_k)_{i,l} = X_{i,(k+l) mod d}` for `l < h`, one per
/// shift `k`: the time-domain form of the circular linear CNN.
pub fn circulant_patches(x: &Matrix, spec: &CirculantSpec) -> Result<PatchSet> {
    let d = spec.signal_len;
    if x.cols() != d {
        return Err(Error::Shape(format!("data has {} columns, spec expects {d}", x.cols())));
    }
    let patches = (0..d)
        .map(|k| Matrix::from_fn(x.rows(), spec.filter_len, |i, l| x[(i, (k + l) % d)]))
        .collect();
    PatchSet::new(patches)
}

/// Solution of the DFT-domain lasso for a circular CNN.
#[derive(Clone, Debug, PartialEq)]
pub struct CircularSolution {
    pub z: Vec<Complex64>,
    /// `½‖X̃z − y‖² + penalty · ‖z‖₁`.
    pub value: f64,
    pub diagnostics: SolverDiagnostics,
}

/// `min_z ½‖X̃z − y‖² + spec.penalty(β)‖z‖₁` over complex `z`.
///
/// Exactly equivalent to the circular linear CNN with full-length filters;
/// with `h < d` the frequency-domain program drops the filter support
/// constraint and so lower-bounds the CNN optimum.
pub fn train_circular_cnn(
    x: &Matrix,
    y: &[f64],
    beta: f64,
    spec: &CirculantSpec,
    cfg: &SolverConfig,
) -> Result<CircularSolution> {
    let xt = circulant_features(x, spec)?;
    let lambda = spec.penalty(beta);
    let (z, diagnostics) = fista_complex_lasso(&xt, y, lambda, cfg)?;
    let pred = xt.matvec(&z);
    let value = 0.5 * pred.iter().zip(y).map(|(p, &t)| (p - t).norm_sqr()).sum::<f64>()
        + lambda * z.iter().map(|t| t.norm()).sum::<f64>();
    Ok(CircularSolution { z, value, diagnostics })
}

/// Real filter `c` with `X c = Re(X̃ z)`, i.e. `Re(F z)` in the chosen
/// normalization. Diagnostic only.
pub fn effective_filter(z: &[Complex64], spec: &CirculantSpec) -> Result<Vec<f64>> {
    if z.len() != spec.signal_len {
        return Err(Error::Shape(format!("{} coefficients for d = {}", z.len(), spec.signal_len)));
    }
    let s = spec.transform_scale();
    // (XF z)_i = Σ_l X_il (F z)_l since F is symmetric
    Ok(dft(z).iter().map(|c| c.re * s).collect())
}

/// `½‖Σ_k X_k z_k − y‖²` evaluated blockwise; used to compare the separable
/// and stacked formulations.
pub fn blockwise_squared_loss(ps: &PatchSet, y_blocks: &[Vec<f64>], w: &[f64]) -> Result<f64> {
    if y_blocks.len() != ps.k() {
        return Err(Error::Shape(format!("{} label blocks for {} patches", y_blocks.len(), ps.k())));
    }
    let mut total = 0.0;
    for (p, yb) in ps.patches.iter().zip(y_blocks) {
        for i in 0..p.rows() {
            let r = dot(p.row(i), w) - yb[i];
            total += 0.5 * r * r;
        }
    }
    Ok(total)
}
