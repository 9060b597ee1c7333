//! Supervised benchmark: data from a random generative network, agents
//! scored by the negative log-likelihood of marginal (`τ = 1`) and joint
//! (`τ > 1`) predictions.

use crate::enn::{evaluation_indices, log_joint_likelihood, EnnConfig, EnnParams, EpistemicIndex, Objective, Trainer, Variant};
use crate::numerics::{forward_batch, softmax, AdamConfig, Matrix, MlpParams, MlpShape, Rng};
use crate::{Error, Result};

/// Probability floor applied to a realised tuple before taking the log.
pub const MIN_PROB: f64 = 1e-12;

/// Frozen two-class network `input → 50 → 50 → 2` with He-normal weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeModel {
    params: MlpParams,
    temperature: f64,
}

impl GenerativeModel {
    pub const HIDDEN: [usize; 2] = [50, 50];

    pub fn new(input_dim: usize, seed: u64) -> Result<Self> {
        let shape = MlpShape::with_hidden(input_dim, &Self::HIDDEN, 2)?;
        let data = shape.he_normal_init(&mut Rng::new(seed).child("generative"));
        Self::from_params(MlpParams::new(shape, data)?, 1.0)
    }

    pub fn from_params(params: MlpParams, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature {temperature} must be positive")));
        }
        Ok(Self { params, temperature })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn input_dim(&self) -> usize {
        self.params.shape().input_dim()
    }

    pub fn classes(&self) -> usize {
        self.params.shape().output_dim()
    }

    pub fn logits(&self, x: &Matrix) -> Matrix {
        let mut out = forward_batch(self.params.shape(), self.params.as_slice(), x, None).output;
        out.as_mut_slice().iter_mut().for_each(|v| *v /= self.temperature);
        out
    }

    /// Class probabilities, one row per input.
    pub fn probs(&self, x: &Matrix) -> Matrix {
        let logits = self.logits(x);
        let rows: Vec<Vec<f64>> = logits.iter_rows().map(|r| softmax(r).expect("finite logits")).collect();
        Matrix::from_rows(&rows).expect("rectangular")
    }

    pub fn sample_labels(&self, x: &Matrix, rng: &mut Rng) -> Vec<usize> {
        let probs = self.probs(x);
        probs
            .iter_rows()
            .map(|p| {
                let u = rng.uniform();
                let mut acc = 0.0;
                p.iter()
                    .position(|q| {
                        acc += q;
                        u < acc
                    })
                    .unwrap_or(p.len() - 1)
            })
            .collect()
    }

    /// The model itself as an index-invariant ENN (a perfect predictor).
    pub fn as_enn(&self) -> Result<EnnParams> {
        let mut data = self.params.as_slice().to_vec();
        let t = self.temperature;
        let shape = self.params.shape();
        let last = shape.layers().last().expect("at least one layer");
        data[last.w..].iter_mut().for_each(|v| *v /= t);
        EnnParams::from_mlp(&MlpParams::new(shape.clone(), data)?)
    }
}

fn gaussian_inputs(n: usize, dim: usize, rng: &mut Rng) -> Matrix {
    Matrix::from_vec(n, dim, (0..n * dim).map(|_| rng.normal()).collect()).expect("sized")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestbedProblem {
    pub seed: u64,
    pub model: GenerativeModel,
    pub train_x: Matrix,
    pub train_y: Vec<usize>,
}

impl TestbedProblem {
    /// Evaluation batch `batch` of `tau` fresh inputs with sampled labels.
    /// Drawn from a stream disjoint from the training data.
    pub fn eval_batch(&self, batch: u64, tau: usize) -> (Matrix, Vec<usize>) {
        let mut rng = Rng::new(self.seed).child("eval").child_idx(batch);
        let x = gaussian_inputs(tau, self.model.input_dim(), &mut rng);
        let y = self.model.sample_labels(&x, &mut rng);
        (x, y)
    }
}

pub fn generate_problem(seed: u64, input_dim: usize, num_train: usize) -> Result<TestbedProblem> {
    if input_dim == 0 || num_train == 0 {
        return Err(Error::InvalidConfig("input dimension and training size must be positive".into()));
    }
    let model = GenerativeModel::new(input_dim, seed)?;
    let mut rng = Rng::new(seed).child("train");
    let train_x = gaussian_inputs(num_train, input_dim, &mut rng);
    let train_y = model.sample_labels(&train_x, &mut rng);
    Ok(TestbedProblem {
        seed,
        model,
        train_x,
        train_y,
    })
}

/// Index samples per gradient step used unless overridden.
pub fn default_index_batch(variant: &Variant) -> usize {
    match variant {
        Variant::Epinet { .. } => 5,
        _ => 20,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    /// `None` picks [`default_index_batch`].
    pub index_batch: Option<usize>,
    pub lambda: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_size: 128,
            index_batch: None,
            lambda: 1.0,
            adam: AdamConfig::default(),
        }
    }
}

/// Trains a fresh ENN on `(x, y)` with minibatches drawn with replacement.
pub fn train_on(config: &EnnConfig, x: &Matrix, y: &[usize], train: &TrainConfig, rng: &mut Rng) -> Result<EnnParams> {
    if train.steps == 0 || train.batch_size == 0 {
        return Err(Error::InvalidConfig("training budget and batch size must be positive".into()));
    }
    if x.rows() != y.len() || x.rows() == 0 {
        return Err(Error::Shape(format!("{} inputs for {} labels", x.rows(), y.len())));
    }
    let mut enn = EnnParams::init(config, &mut rng.child("init"))?;
    let mut trainer = Trainer::new(&enn, train.adam, train.lambda);
    let reference = enn.reference();
    let index_batch = train.index_batch.unwrap_or_else(|| default_index_batch(&config.variant));
    let mut rng = rng.child("minibatch");
    let mut bx = Matrix::zeros(train.batch_size, x.cols());
    let mut by = vec![0; train.batch_size];
    for _ in 0..train.steps {
        for (r, label) in by.iter_mut().enumerate() {
            let i = rng.below(x.rows());
            bx.row_mut(r).copy_from_slice(x.row(i));
            *label = y[i];
        }
        let zs = reference.sample_many(index_batch, &mut rng);
        trainer.step(&mut enn, &bx, &zs, &Objective::CrossEntropy { labels: &by }, x.rows())?;
    }
    Ok(enn)
}

pub fn train_supervised(config: &EnnConfig, problem: &TestbedProblem, train: &TrainConfig, rng: &mut Rng) -> Result<EnnParams> {
    if config.input_dim != problem.model.input_dim() || config.outputs != problem.model.classes() {
        return Err(Error::Shape("ENN does not match the problem's input or class count".into()));
    }
    train_on(config, &problem.train_x, &problem.train_y, train, rng)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NllReport {
    pub agent: String,
    pub tau: usize,
    /// Mean of `-log P̂(y_1..y_τ)` over evaluation batches.
    pub nll: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    /// Batches whose realised tuple probability hit [`MIN_PROB`].
    pub clamped: usize,
}

/// Joint NLL over `num_batches` evaluation batches of `tau` inputs. Each
/// batch uses its own index set of `m` samples (every particle for finite
/// ensembles).
pub fn evaluate_nll(
    enn: &EnnParams,
    problem: &TestbedProblem,
    tau: usize,
    num_batches: usize,
    m: usize,
    rng: &mut Rng,
) -> Result<NllReport> {
    if !(1..=10).contains(&tau) || num_batches == 0 || m == 0 {
        return Err(Error::InvalidConfig(format!(
            "need 1 ≤ τ ≤ 10 and positive batch and index counts (τ {tau}, batches {num_batches}, m {m})"
        )));
    }
    let reference = enn.reference();
    let mut values = Vec::with_capacity(num_batches);
    let mut clamped = 0;
    for b in 0..num_batches {
        let (x, y) = problem.eval_batch(b as u64, tau);
        let zs: Vec<EpistemicIndex> = evaluation_indices(&reference, m, rng);
        let ll = log_joint_likelihood(enn, &x, &y, &zs)?;
        if ll < MIN_PROB.ln() {
            clamped += 1;
        }
        values.push(-ll.max(MIN_PROB.ln()));
    }
    let n = values.len() as f64;
    let nll = values.iter().sum::<f64>() / n;
    let stderr = if values.len() > 1 {
        (values.iter().map(|v| (v - nll).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    Ok(NllReport {
        agent: enn.config().variant.name().to_string(),
        tau,
        nll,
        stderr,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cross_entropy;

    #[test]
    fn problems_are_reproducible() {
        let a = generate_problem(3, 10, 50).unwrap();
        let b = generate_problem(3, 10, 50).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.eval_batch(4, 10), b.eval_batch(4, 10));
        assert_ne!(a.eval_batch(4, 10), a.eval_batch(5, 10));
        assert_ne!(generate_problem(4, 10, 50).unwrap().train_x, a.train_x);
    }

    #[test]
    fn eval_inputs_differ_from_training_inputs() {
        let p = generate_problem(1, 5, 100).unwrap();
        let (x, _) = p.eval_batch(0, 10);
        for r in x.iter_rows() {
            assert!(p.train_x.iter_rows().all(|t| t != r));
        }
    }

    #[test]
    fn generative_param_count() {
        let m = GenerativeModel::new(100, 0).unwrap();
        assert_eq!(m.params().as_slice().len(), (100 * 50 + 50) + (50 * 50 + 50) + (50 * 2 + 2));
    }

    #[test]
    fn label_frequency_matches_model() {
        let p = generate_problem(9, 10, 10_000).unwrap();
        let probs = p.model.probs(&p.train_x);
        let expected = probs.iter_rows().map(|r| r[1]).sum::<f64>() / 1e4;
        let observed = p.train_y.iter().filter(|&&y| y == 1).count() as f64 / 1e4;
        assert!((expected - observed).abs() < 0.02, "{expected} vs {observed}");
    }

    #[test]
    fn uniform_predictor_nll_is_tau_ln2() {
        let config = EnnConfig::new(4, vec![3], 2, Variant::Mlp);
        let zeros = vec![0.0; config.base_shape().unwrap().param_count()];
        let enn = EnnParams::from_parts(&config, zeros, vec![]).unwrap();
        let p = generate_problem(0, 4, 10).unwrap();
        let r = evaluate_nll(&enn, &p, 10, 20, 1, &mut Rng::new(0)).unwrap();
        assert!((r.nll - 10.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(r.clamped, 0);
    }

    #[test]
    fn oracle_marginal_nll_matches_entropy() {
        let p = generate_problem(5, 10, 10).unwrap();
        let oracle = p.model.as_enn().unwrap();
        let batches = 4000;
        let r = evaluate_nll(&oracle, &p, 1, batches, 1, &mut Rng::new(1)).unwrap();
        // Entropy of the model's predictive on fresh inputs, estimated
        // independently of the labels.
        let mut rng = Rng::new(77);
        let x = gaussian_inputs(20_000, 10, &mut rng);
        let probs = p.model.probs(&x);
        let entropy = probs
            .iter_rows()
            .map(|q| -q.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>())
            .sum::<f64>()
            / 20_000.0;
        assert!((r.nll - entropy).abs() < 2.0 * r.stderr + 0.005, "{} vs {entropy} (se {})", r.nll, r.stderr);
    }

    #[test]
    fn tau_one_matches_cross_entropy_of_averaged_marginal() {
        let p = generate_problem(2, 3, 10).unwrap();
        let config = EnnConfig::new(3, vec![6], 2, Variant::Ensemble { size: 3 });
        let enn = EnnParams::init(&config, &mut Rng::new(4)).unwrap();
        let r = evaluate_nll(&enn, &p, 1, 30, 1, &mut Rng::new(0)).unwrap();
        let mut total = 0.0;
        for b in 0..30 {
            let (x, y) = p.eval_batch(b, 1);
            let mut avg = [0.0; 2];
            for k in 0..3 {
                let q = softmax(&enn.forward(x.row(0), &EpistemicIndex::Particle(k)).unwrap()).unwrap();
                avg[0] += q[0] / 3.0;
                avg[1] += q[1] / 3.0;
            }
            let logits = [avg[0].ln(), avg[1].ln()];
            total += cross_entropy(&logits, y[0]).unwrap();
        }
        assert!((r.nll - total / 30.0).abs() < 1e-9);
    }

    #[test]
    fn zero_probability_tuple_is_clamped() {
        let config = EnnConfig::new(2, vec![1], 2, Variant::Mlp);
        // Output bias makes class 0 certain.
        let enn = EnnParams::from_parts(&config, vec![0.0, 0.0, 0.0, 0.0, 0.0, 800.0, -800.0], vec![]).unwrap();
        let p = generate_problem(0, 2, 10).unwrap();
        let r = evaluate_nll(&enn, &p, 10, 10, 1, &mut Rng::new(0)).unwrap();
        assert!(r.clamped > 0);
        assert!(r.nll <= -MIN_PROB.ln() + 1e-9);
    }

    #[test]
    fn mlp_training_reduces_nll() {
        let p = generate_problem(7, 10, 1000).unwrap();
        let config = EnnConfig::new(10, vec![50, 50], 2, Variant::Mlp);
        let train = TrainConfig {
            steps: 2000,
            ..TrainConfig::default()
        };
        let init = EnnParams::init(&config, &mut Rng::new(0).child("init")).unwrap();
        let trained = train_supervised(&config, &p, &train, &mut Rng::new(0)).unwrap();
        let zs = [EpistemicIndex::Particle(0)];
        let nll = |e: &EnnParams| -log_joint_likelihood(e, &p.train_x, &p.train_y, &zs).unwrap() / 1000.0;
        assert!(nll(&trained) < nll(&init));
    }

    #[test]
    fn separable_data_is_fitted() {
        let mut rng = Rng::new(3);
        let x = gaussian_inputs(400, 2, &mut rng);
        let y: Vec<usize> = x.iter_rows().map(|r| (r[0] + 0.5 * r[1] > 0.0) as usize).collect();
        let config = EnnConfig::new(2, vec![16], 2, Variant::Mlp);
        let train = TrainConfig {
            steps: 3000,
            lambda: 0.0,
            adam: AdamConfig::with_lr(1e-2),
            ..TrainConfig::default()
        };
        let enn = train_on(&config, &x, &y, &train, &mut rng).unwrap();
        let z = EpistemicIndex::Particle(0);
        let correct = x
            .iter_rows()
            .zip(&y)
            .filter(|(r, &label)| {
                let o = enn.forward(r, &z).unwrap();
                (o[1] > o[0]) as usize == label
            })
            .count();
        assert!(correct as f64 / 400.0 > 0.99, "{correct}");
    }

    #[test]
    fn training_rejects_bad_budgets() {
        let p = generate_problem(0, 2, 10).unwrap();
        let config = EnnConfig::new(2, vec![4], 2, Variant::Mlp);
        let zero = TrainConfig {
            steps: 0,
            ..TrainConfig::default()
        };
        assert!(train_supervised(&config, &p, &zero, &mut Rng::new(0)).is_err());
        let wrong = EnnConfig::new(3, vec![4], 2, Variant::Mlp);
        assert!(train_supervised(&wrong, &p, &TrainConfig::default(), &mut Rng::new(0)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let p = generate_problem(0, 2, 10).unwrap();
        let config = EnnConfig::new(2, vec![4], 2, Variant::Mlp);
        let train = TrainConfig {
            steps: 50,
            lambda: 0.0,
            adam: AdamConfig::with_lr(f64::INFINITY),
            ..TrainConfig::default()
        };
        let err = train_supervised(&config, &p, &train, &mut Rng::new(0)).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err:?}");
    }

    #[test]
    fn ranking_is_invariant_to_a_shared_constant() {
        let scores = [2.3, 1.7, 4.0, 0.2, 3.1];
        let rank = |s: &[f64]| {
            let mut idx: Vec<usize> = (0..s.len()).collect();
            idx.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
            idx
        };
        for shift in [-5.0, 0.0, 1e3] {
            let moved: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            assert_eq!(rank(&moved), rank(&scores));
        }
    }
}
