use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, Presorted, Tree, TreeParams};
use super::{Matrix, MlError, ModelKind, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Logistic { w: Vec<f64>, b: f64 },
    Tree(Tree),
    Forest(Vec<Tree>),
    Boosted { f0: f64, learning_rate: f64, trees: Vec<Tree> },
    Knn { k: usize, x: Matrix, y: Vec<u8>, w: Vec<f64> },
    Mlp { hidden: usize, w1: Vec<f64>, b1: Vec<f64>, w2: Vec<f64>, b2: f64 },
    Svm { w: Vec<f64>, b: f64 },
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Model {
    /// Decision score: a class-1 probability, or a signed margin for the SVM.
    pub fn score(&self, x: &[f64]) -> f64 {
        match self {
            Model::Logistic { w, b } => sigmoid(dot(w, x) + b),
            Model::Tree(t) => t.predict(x),
            Model::Forest(ts) => ts.iter().map(|t| t.predict(x)).sum::<f64>() / ts.len() as f64,
            Model::Boosted { f0, learning_rate, trees } => {
                sigmoid(f0 + learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>())
            }
            Model::Knn { k, x: train, y, w } => {
                let mut d: Vec<(f64, usize)> = (0..train.rows)
                    .map(|i| (train.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
                    .collect();
                let k = (*k).min(d.len());
                d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let (mut num, mut den) = (0.0, 0.0);
                for &(_, i) in &d[..k] {
                    num += w[i] * y[i] as f64;
                    den += w[i];
                }
                num / den
            }
            Model::Mlp { hidden, w1, b1, w2, b2 } => {
                let d = x.len();
                let mut z = *b2;
                for h in 0..*hidden {
                    let a = (dot(&w1[h * d..(h + 1) * d], x) + b1[h]).max(0.0);
                    z += w2[h] * a;
                }
                sigmoid(z)
            }
            Model::Svm { w, b } => dot(w, x) + b,
        }
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        let s = self.score(x);
        match self {
            Model::Svm { .. } => (s > 0.0) as u8,
            _ => (s > 0.5) as u8,
        }
    }
}

fn param(p: &Params, name: &str) -> Result<f64, MlError> {
    p.get(name).copied().ok_or_else(|| MlError::InvalidGrid(format!("missing `{name}`")))
}

fn count_param(p: &Params, name: &str) -> Result<usize, MlError> {
    let v = param(p, name)?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(MlError::InvalidGrid(format!("`{name}` must be a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

/// Weights that give both classes equal total mass, averaging 1 per row.
fn class_weights(y: &[u8]) -> Vec<f64> {
    let n1 = y.iter().filter(|&&v| v == 1).count() as f64;
    let n0 = y.len() as f64 - n1;
    let n = y.len() as f64;
    y.iter().map(|&v| if v == 1 { n / (2.0 * n1) } else { n / (2.0 * n0) }).collect()
}

/// Train a classifier of `kind` with hyperparameters `params` on `(x, y)`.
///
/// Rows are weighted so that both classes carry equal total weight.
pub fn train(kind: ModelKind, params: &Params, x: &Matrix, y: &[u8], seed: u64) -> Result<Model, MlError> {
    if x.rows != y.len() {
        return Err(MlError::InvalidData(format!("{} rows but {} labels", x.rows, y.len())));
    }
    let n1 = y.iter().filter(|&&v| v == 1).count();
    if n1 < 2 || x.rows - n1 < 2 {
        return Err(MlError::Training(format!("need two rows per class, have {} and {}", x.rows - n1, n1)));
    }
    if x.data.iter().any(|v| !v.is_finite()) {
        return Err(MlError::InvalidData("non-finite feature value".into()));
    }
    let w = class_weights(y);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        ModelKind::LogisticRegression => logistic(x, y, &w, param(params, "C")?),
        ModelKind::DecisionTree => {
            let tp = TreeParams {
                max_depth: count_param(params, "max_depth")?,
                min_leaf: count_param(params, "min_leaf")?.max(1),
                max_features: None,
                criterion: Criterion::Gini,
            };
            let wy: Vec<f64> = w.iter().zip(y).map(|(a, &b)| a * b as f64).collect();
            Ok(Model::Tree(grow(x, &Presorted::new(x), &w, &wy, &vec![true; x.rows], &tp, &mut rng)))
        }
        ModelKind::RandomForest => {
            let n_trees = count_param(params, "n_trees")?.max(1);
            let tp = TreeParams {
                max_depth: count_param(params, "max_depth")?,
                min_leaf: count_param(params, "min_leaf")?.max(1),
                max_features: Some(((x.cols as f64).sqrt().round() as usize).max(1)),
                criterion: Criterion::Gini,
            };
            let pre = Presorted::new(x);
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let mut mult = vec![0.0; x.rows];
                for _ in 0..x.rows {
                    mult[rng.random_range(0..x.rows)] += 1.0;
                }
                let include: Vec<bool> = mult.iter().map(|&m| m > 0.0).collect();
                let a: Vec<f64> = mult.iter().zip(&w).map(|(m, w)| m * w).collect();
                let b: Vec<f64> = a.iter().zip(y).map(|(a, &v)| a * v as f64).collect();
                trees.push(grow(x, &pre, &a, &b, &include, &tp, &mut rng));
            }
            Ok(Model::Forest(trees))
        }
        ModelKind::GradientBoost | ModelKind::XgBoost => {
            let stages = count_param(params, "n_stages")?;
            let lr = param(params, "learning_rate")?;
            let lambda = param(params, "lambda")?;
            let tp = TreeParams {
                max_depth: count_param(params, "max_depth")?,
                min_leaf: 1,
                max_features: None,
                criterion: Criterion::Newton { lambda },
            };
            let pre = Presorted::new(x);
            // Balanced weights make the weighted prevalence one half.
            let f0 = 0.0;
            let mut f = vec![f0; x.rows];
            let mut trees = Vec::with_capacity(stages);
            let include = vec![true; x.rows];
            for _ in 0..stages {
                let mut g = vec![0.0; x.rows];
                let mut h = vec![0.0; x.rows];
                for i in 0..x.rows {
                    let p = sigmoid(f[i]);
                    g[i] = w[i] * (p - y[i] as f64);
                    h[i] = w[i] * p * (1.0 - p);
                }
                let t = grow(x, &pre, &g, &h, &include, &tp, &mut rng);
                for (i, fi) in f.iter_mut().enumerate() {
                    *fi += lr * t.predict(x.row(i));
                }
                trees.push(t);
            }
            Ok(Model::Boosted { f0, learning_rate: lr, trees })
        }
        ModelKind::KNearestNeighbors => {
            let k = count_param(params, "k")?.max(1);
            Ok(Model::Knn { k, x: x.clone(), y: y.to_vec(), w })
        }
        ModelKind::MultilayerPerceptron => mlp(x, y, &w, params, &mut rng),
        ModelKind::LinearSvm => svm(x, y, &w, params, &mut rng),
    }
}

/// L2-penalized logistic regression by Newton's method; the intercept is not
/// penalized.
fn logistic(x: &Matrix, y: &[u8], w: &[f64], c: f64) -> Result<Model, MlError> {
    if !(c > 0.0) {
        return Err(MlError::InvalidGrid("C must be positive".into()));
    }
    let d = x.cols;
    let mut beta = DVector::<f64>::zeros(d + 1);
    for _ in 0..100 {
        let mut grad = DVector::<f64>::zeros(d + 1);
        let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
        for i in 0..x.rows {
            let xi = x.row(i);
            let z = beta[d] + (0..d).map(|j| beta[j] * xi[j]).sum::<f64>();
            let p = sigmoid(z);
            let r = w[i] * (y[i] as f64 - p);
            let wt = w[i] * p * (1.0 - p);
            for a in 0..=d {
                let xa = if a == d { 1.0 } else { xi[a] };
                grad[a] += r * xa;
                for b in 0..=a {
                    let xb = if b == d { 1.0 } else { xi[b] };
                    hess[(a, b)] += wt * xa * xb;
                }
            }
        }
        for a in 0..=d {
            for b in 0..a {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        for j in 0..d {
            grad[j] -= beta[j] / c;
            hess[(j, j)] += 1.0 / c;
        }
        hess[(d, d)] += 1e-10;
        let step = hess
            .cholesky()
            .ok_or_else(|| MlError::Training("logistic Hessian is not positive definite".into()))?
            .solve(&grad);
        beta += &step;
        if step.amax() < 1e-10 {
            break;
        }
    }
    Ok(Model::Logistic { w: beta.as_slice()[..d].to_vec(), b: beta[d] })
}

fn mlp(x: &Matrix, y: &[u8], w: &[f64], params: &Params, rng: &mut ChaCha8Rng) -> Result<Model, MlError> {
    let hidden = count_param(params, "hidden")?.max(1);
    let alpha = param(params, "alpha")?;
    let epochs = count_param(params, "epochs")?;
    let lr = param(params, "learning_rate")?;
    let d = x.cols;
    let init = Normal::new(0.0, (2.0 / d.max(1) as f64).sqrt()).expect("valid scale");
    let mut w1: Vec<f64> = (0..hidden * d).map(|_| init.sample(rng)).collect();
    let mut b1 = vec![0.0; hidden];
    let out = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).expect("valid scale");
    let mut w2: Vec<f64> = (0..hidden).map(|_| out.sample(rng)).collect();
    let mut b2 = 0.0;
    let n_params = hidden * d + 2 * hidden + 1;
    let (mut m, mut v) = (vec![0.0; n_params], vec![0.0; n_params]);
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let batch = 32usize;
    let mut order: Vec<usize> = (0..x.rows).collect();
    let mut t = 0;
    let mut act = vec![0.0; hidden];
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            let mut g = vec![0.0; n_params];
            let norm: f64 = chunk.iter().map(|&i| w[i]).sum();
            for &i in chunk {
                let xi = x.row(i);
                let mut z = b2;
                for h in 0..hidden {
                    act[h] = (dot(&w1[h * d..(h + 1) * d], xi) + b1[h]).max(0.0);
                    z += w2[h] * act[h];
                }
                let delta = w[i] * (sigmoid(z) - y[i] as f64) / norm;
                for h in 0..hidden {
                    g[hidden * d + hidden + h] += delta * act[h];
                    if act[h] > 0.0 {
                        let dh = delta * w2[h];
                        for j in 0..d {
                            g[h * d + j] += dh * xi[j];
                        }
                        g[hidden * d + h] += dh;
                    }
                }
                g[n_params - 1] += delta;
            }
            for (k, wk) in w1.iter().enumerate() {
                g[k] += alpha * wk;
            }
            for (h, wh) in w2.iter().enumerate() {
                g[hidden * d + hidden + h] += alpha * wh;
            }
            t += 1;
            let (c1, c2) = (1.0 - f64::powi(beta1, t), 1.0 - f64::powi(beta2, t));
            for k in 0..n_params {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let step = lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                if k < hidden * d {
                    w1[k] -= step;
                } else if k < hidden * d + hidden {
                    b1[k - hidden * d] -= step;
                } else if k < n_params - 1 {
                    w2[k - hidden * d - hidden] -= step;
                } else {
                    b2 -= step;
                }
            }
        }
    }
    Ok(Model::Mlp { hidden, w1, b1, w2, b2 })
}

/// Hinge-loss linear classifier by stochastic subgradient descent with a
/// `1 / (λ t)` step; the returned weights average the final epoch.
fn svm(x: &Matrix, y: &[u8], w: &[f64], params: &Params, rng: &mut ChaCha8Rng) -> Result<Model, MlError> {
    let lambda = param(params, "lambda")?;
    let epochs = count_param(params, "epochs")?.max(1);
    if !(lambda > 0.0) {
        return Err(MlError::InvalidGrid("lambda must be positive".into()));
    }
    let d = x.cols;
    // The bias is the last coordinate of an augmented constant feature.
    let mut theta = vec![0.0; d + 1];
    let mut avg = vec![0.0; d + 1];
    let mut order: Vec<usize> = (0..x.rows).collect();
    let mut t = 0usize;
    for e in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let xi = x.row(i);
            let s = if y[i] == 1 { 1.0 } else { -1.0 };
            let margin = s * (dot(&theta[..d], xi) + theta[d]);
            for v in theta.iter_mut() {
                *v *= 1.0 - eta * lambda;
            }
            if margin < 1.0 {
                for j in 0..d {
                    theta[j] += eta * w[i] * s * xi[j];
                }
                theta[d] += eta * w[i] * s;
            }
            if e + 1 == epochs {
                for (a, v) in avg.iter_mut().zip(&theta) {
                    *a += v;
                }
            }
        }
    }
    let n = x.rows as f64;
    Ok(Model::Svm { w: avg[..d].iter().map(|v| v / n).collect(), b: avg[d] / n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::metrics;

    fn separable() -> (Matrix, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let c = (i % 2) as u8;
            let off = if c == 1 { 1.5 } else { -1.5 };
            rows.push(vec![off + rng.random_range(-1.0..1.0), off + rng.random_range(-1.0..1.0)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows), y)
    }

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn every_kind_fits_separable_data() {
        let (x, y) = separable();
        let cases = [
            (ModelKind::LogisticRegression, params(&[("C", 100.0)])),
            (ModelKind::DecisionTree, params(&[("max_depth", 4.0), ("min_leaf", 1.0)])),
            (ModelKind::RandomForest, params(&[("n_trees", 20.0), ("max_depth", 6.0), ("min_leaf", 1.0)])),
            (
                ModelKind::GradientBoost,
                params(&[("n_stages", 50.0), ("learning_rate", 0.3), ("max_depth", 2.0), ("lambda", 1.0)]),
            ),
            (ModelKind::XgBoost, params(&[("n_stages", 50.0), ("learning_rate", 0.3), ("max_depth", 3.0), ("lambda", 1.0)])),
            (ModelKind::KNearestNeighbors, params(&[("k", 1.0)])),
            (
                ModelKind::MultilayerPerceptron,
                params(&[("hidden", 8.0), ("alpha", 1e-4), ("epochs", 200.0), ("learning_rate", 0.01)]),
            ),
            (ModelKind::LinearSvm, params(&[("lambda", 1e-3), ("epochs", 50.0)])),
        ];
        for (kind, p) in cases {
            let m = train(kind, &p, &x, &y, 1).unwrap();
            let pred: Vec<u8> = (0..x.rows).map(|i| m.predict(x.row(i))).collect();
            assert_eq!(metrics(&y, &pred).unwrap().0, 1.0, "{kind}");
        }
    }

    #[test]
    fn knn_one_memorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<u8> = (0..40).map(|_| rng.random_range(0..2)).collect();
        let x = Matrix::from_rows(&rows);
        let m = train(ModelKind::KNearestNeighbors, &params(&[("k", 1.0)]), &x, &y, 0).unwrap();
        assert!((0..40).all(|i| m.predict(x.row(i)) == y[i]));
    }

    #[test]
    fn too_few_rows_per_class() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        assert!(matches!(
            train(ModelKind::LogisticRegression, &params(&[("C", 1.0)]), &x, &[0, 0, 1], 0),
            Err(MlError::Training(_))
        ));
    }
}
