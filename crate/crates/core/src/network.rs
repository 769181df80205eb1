//! The nonconvex model `f(x) = Σ_j (xᵀu_j)₊ α_j` and the maps between it and
//! the convex program's solutions.

use serde::{Deserialize, Serialize};

use crate::arrangements::ArrangementSet;
use crate::numerics::vector::{dot, norm2, norm_sq};
use crate::program::{ConvexTrainingProblem, DualCertificate, GroupSolution, LossKind};
use crate::{Error, Matrix, Result};

/// Groups below this fraction of the largest group norm emit no neuron.
pub const NEURON_THRESHOLD_REL: f64 = 1e-10;

/// Hidden weights `U` (`d × m`, one column per neuron) and output weights `α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetJson", into = "NetJson")]
pub struct TwoLayerReLUNet {
    d: usize,
    // one row per neuron, i.e. the columns of U
    neurons: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetJson {
    d: usize,
    m: usize,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    alpha: Vec<f64>,
}

impl From<TwoLayerReLUNet> for NetJson {
    fn from(net: TwoLayerReLUNet) -> Self {
        let u = (0..net.d)
            .map(|i| net.neurons.iter().map(|n| n[i]).collect())
            .collect();
        NetJson {
            d: net.d,
            m: net.width(),
            u,
            alpha: net.alpha,
        }
    }
}

impl TryFrom<NetJson> for TwoLayerReLUNet {
    type Error = Error;

    fn try_from(j: NetJson) -> Result<Self> {
        if j.u.len() != j.d || j.alpha.len() != j.m || j.u.iter().any(|r| r.len() != j.m) {
            return Err(Error::Shape(format!(
                "network JSON declares d = {}, m = {} but U has {} rows and alpha {} entries",
                j.d,
                j.m,
                j.u.len(),
                j.alpha.len()
            )));
        }
        let neurons = (0..j.m).map(|k| j.u.iter().map(|r| r[k]).collect()).collect();
        TwoLayerReLUNet::from_neurons(j.d, neurons, j.alpha)
    }
}

impl TwoLayerReLUNet {
    /// From `U` as a `d × m` matrix.
    pub fn new(u: &Matrix, alpha: Vec<f64>) -> Result<Self> {
        if u.cols() != alpha.len() {
            return Err(Error::Shape(format!(
                "U has {} columns but alpha has {} entries",
                u.cols(),
                alpha.len()
            )));
        }
        let neurons = (0..u.cols()).map(|j| u.column(j)).collect();
        TwoLayerReLUNet::from_neurons(u.rows(), neurons, alpha)
    }

    pub fn from_neurons(d: usize, neurons: Vec<Vec<f64>>, alpha: Vec<f64>) -> Result<Self> {
        if neurons.len() != alpha.len() {
            return Err(Error::Shape(format!(
                "{} neurons but {} output weights",
                neurons.len(),
                alpha.len()
            )));
        }
        if let Some(n) = neurons.iter().find(|n| n.len() != d) {
            return Err(Error::Shape(format!("neuron of length {} for d = {d}", n.len())));
        }
        if neurons.iter().flatten().chain(&alpha).any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("network weights must be finite".into()));
        }
        Ok(TwoLayerReLUNet { d, neurons, alpha })
    }

    pub fn empty(d: usize) -> Self {
        TwoLayerReLUNet {
            d,
            neurons: Vec::new(),
            alpha: Vec::new(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn width(&self) -> usize {
        self.alpha.len()
    }

    /// Hidden vector `u_j`.
    pub fn hidden(&self, j: usize) -> Vec<f64> {
        self.neurons[j].clone()
    }

    pub fn neurons(&self) -> &[Vec<f64>] {
        &self.neurons
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `U` as a `d × m` matrix.
    pub fn u_matrix(&self) -> Matrix {
        Matrix::from_fn(self.d, self.width(), |i, j| self.neurons[j][i])
    }

    pub(crate) fn neurons_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.neurons
    }

    pub(crate) fn alpha_mut(&mut self) -> &mut [f64] {
        &mut self.alpha
    }

    pub fn is_finite(&self) -> bool {
        self.neurons.iter().flatten().chain(&self.alpha).all(|t| t.is_finite())
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.d {
            return Err(Error::Shape(format!(
                "network expects {} inputs, data has {} columns",
                self.d,
                x.cols()
            )));
        }
        Ok(())
    }

    /// `Σ_j (X u_j)₊ α_j`.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; x.rows()];
        for (u, &a) in self.neurons.iter().zip(&self.alpha) {
            if a == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                let t = dot(x.row(i), u);
                if t > 0.0 {
                    *o += a * t;
                }
            }
        }
        Ok(out)
    }

    /// `(β/2) Σ_j (‖u_j‖² + α_j²)`.
    pub fn weight_decay(&self, beta: f64) -> f64 {
        0.5 * beta
            * self
                .neurons
                .iter()
                .zip(&self.alpha)
                .map(|(u, a)| norm_sq(u) + a * a)
                .sum::<f64>()
    }

    /// `β Σ_j |α_j| ‖u_j‖`, the cost after balancing.
    pub fn path_cost(&self, beta: f64) -> f64 {
        beta * self
            .neurons
            .iter()
            .zip(&self.alpha)
            .map(|(u, a)| a.abs() * norm2(u))
            .sum::<f64>()
    }

    /// Regularized training cost `ℓ(f(X), y) + (β/2) Σ_j (‖u_j‖² + α_j²)`.
    pub fn nonconvex_cost(&self, x: &Matrix, y: &[f64], beta: f64, loss: LossKind) -> Result<f64> {
        let yhat = self.predict(x)?;
        if y.len() != yhat.len() {
            return Err(Error::Shape(format!("{} samples but {} labels", yhat.len(), y.len())));
        }
        Ok(loss.value(&yhat, y) + self.weight_decay(beta))
    }

    /// Merges neurons whose `α`-absorbed vectors `|α_j| u_j` have the same
    /// output sign and cosine at least `1 − tol`, summing the absorbed
    /// vectors. The result is balanced; zero neurons are dropped.
    pub fn merge_colinear(&self, tol: f64) -> Result<Self> {
        if !(tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be ≥ 0, got {tol}")));
        }
        // (sign, absorbed vector, unit direction)
        let mut groups: Vec<(f64, Vec<f64>, Vec<f64>)> = Vec::new();
        for (u, &a) in self.neurons.iter().zip(&self.alpha) {
            let nu = norm2(u);
            if a == 0.0 || nu == 0.0 {
                continue;
            }
            let sign = a.signum();
            let dir: Vec<f64> = u.iter().map(|t| t / nu).collect();
            let absorbed: Vec<f64> = u.iter().map(|t| t * a.abs()).collect();
            match groups
                .iter_mut()
                .find(|(s, _, d)| *s == sign && dot(d, &dir) >= 1.0 - tol)
            {
                Some((_, acc, _)) => {
                    for (o, t) in acc.iter_mut().zip(&absorbed) {
                        *o += t;
                    }
                }
                None => groups.push((sign, absorbed, dir)),
            }
        }
        let mut neurons = Vec::with_capacity(groups.len());
        let mut alpha = Vec::with_capacity(groups.len());
        for (sign, v, _) in groups {
            let r = norm2(&v).sqrt();
            if r == 0.0 {
                continue;
            }
            neurons.push(v.iter().map(|t| t / r).collect());
            alpha.push(sign * r);
        }
        TwoLayerReLUNet::from_neurons(self.d, neurons, alpha)
    }

    /// Rescales each neuron by `γ_j = (|α_j| / ‖u_j‖)^{1/2}`, so that
    /// `‖u_j‖ = |α_j|` and the weight decay equals the path cost.
    pub fn rescale_balanced(&self) -> Result<Self> {
        let mut out = self.clone();
        for (j, (u, a)) in out.neurons.iter_mut().zip(out.alpha.iter_mut()).enumerate() {
            let nu = norm2(u);
            if *a == 0.0 {
                u.iter_mut().for_each(|t| *t = 0.0);
                continue;
            }
            if nu == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "neuron {j} has a zero hidden vector but output weight {a}"
                )));
            }
            let gamma = (a.abs() / nu).sqrt();
            u.iter_mut().for_each(|t| *t *= gamma);
            *a /= gamma;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("network JSON: {e}")))
    }
}

/// Optimal neurons from a convex solution: `(v/√‖v‖, √‖v‖)` for each nonzero
/// `v_i` and `(w/√‖w‖, −√‖w‖)` for each nonzero `w_i`.
pub fn reconstruct(sol: &GroupSolution, patterns: &ArrangementSet) -> Result<TwoLayerReLUNet> {
    if sol.v.len() != patterns.len() || sol.w.len() != patterns.len() {
        return Err(Error::Shape(format!(
            "solution has {} groups for {} patterns",
            sol.v.len(),
            patterns.len()
        )));
    }
    let d = match sol.v.first() {
        Some(g) => g.len(),
        None => return Err(Error::InvalidArgument("solution has no groups".into())),
    };
    let cut = NEURON_THRESHOLD_REL * sol.max_group_norm();
    let mut neurons = Vec::new();
    let mut alpha = Vec::new();
    for (groups, sign) in [(&sol.v, 1.0), (&sol.w, -1.0)] {
        for g in groups.iter() {
            let n = norm2(g);
            if n == 0.0 || n <= cut {
                continue;
            }
            let r = n.sqrt();
            neurons.push(g.iter().map(|t| t / r).collect());
            alpha.push(sign * r);
        }
    }
    TwoLayerReLUNet::from_neurons(d, neurons, alpha)
}

/// `nonconvex_cost(net) − d*`, with `d*` the certificate's global dual value.
pub fn suboptimality_gap(
    net: &TwoLayerReLUNet,
    problem: &ConvexTrainingProblem,
    cert: &DualCertificate,
) -> Result<f64> {
    if !cert.valid {
        return Err(Error::InvalidCertificate(
            "the dual candidate violates the program's constraints; solve the convex program first"
                .into(),
        ));
    }
    if cert.v_hat.len() != problem.n() {
        return Err(Error::Shape(format!(
            "certificate over {} samples for {} samples",
            cert.v_hat.len(),
            problem.n()
        )));
    }
    let cost = net.nonconvex_cost(problem.x(), problem.y(), problem.beta(), problem.loss())?;
    Ok(cost - cert.global_dual_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_x() -> Matrix {
        Matrix::from_rows(&[[-2.0, 1.0], [-1.0, 1.0], [0.0, 1.0], [1.0, 1.0], [2.0, 1.0]]).unwrap()
    }

    #[test]
    fn predict_single_neuron() {
        let net = TwoLayerReLUNet::from_neurons(2, vec![vec![1.0, 0.0]], vec![1.0]).unwrap();
        assert_eq!(net.predict(&toy_x()).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 2.0]);
        let dup = TwoLayerReLUNet::from_neurons(2, vec![vec![1.0, 0.0]; 2], vec![0.5, 0.5]).unwrap();
        assert_eq!(dup.predict(&toy_x()).unwrap(), vec![0.0, 0.0, 0.0, 1.0, 2.0]);
        assert!(net.predict(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn rescale_example() {
        let net = TwoLayerReLUNet::from_neurons(2, vec![vec![0.0, 2.0]], vec![8.0]).unwrap();
        let b = net.rescale_balanced().unwrap();
        assert_eq!(b.hidden(0), vec![0.0, 4.0]);
        assert_eq!(b.alpha(), &[4.0]);
        assert_eq!(b.weight_decay(1.0), 16.0);
        let bad = TwoLayerReLUNet::from_neurons(1, vec![vec![0.0]], vec![1.0]).unwrap();
        assert!(bad.rescale_balanced().is_err());
    }

    #[test]
    fn merge_rules() {
        let x = toy_x();
        let same = TwoLayerReLUNet::from_neurons(2, vec![vec![1.0, 0.5]; 2], vec![1.0, 1.0]).unwrap();
        let m = same.merge_colinear(1e-9).unwrap();
        assert_eq!(m.width(), 1);
        let a = same.predict(&x).unwrap();
        let b = m.predict(&x).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-12));

        let opp = TwoLayerReLUNet::from_neurons(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![1.0, 1.0]).unwrap();
        assert_eq!(opp.merge_colinear(1e-9).unwrap().width(), 2);
    }

    #[test]
    fn json_layout() {
        let net = TwoLayerReLUNet::from_neurons(2, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]], vec![1.0, -1.0, 0.5]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&net.to_json()).unwrap();
        assert_eq!(v["d"], 2);
        assert_eq!(v["m"], 3);
        assert_eq!(v["U"][0], serde_json::json!([1.0, 3.0, 5.0]));
        assert_eq!(TwoLayerReLUNet::from_json(&net.to_json()).unwrap(), net);
        assert!(TwoLayerReLUNet::from_json(r#"{"d":1,"m":2,"U":[[1.0]],"alpha":[1.0,2.0]}"#).is_err());
    }
}
