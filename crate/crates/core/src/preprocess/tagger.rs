//! Multinomial logistic regression over word vectors, one decision per word.

use thiserror::Error;

/// The "no label" class, always part of a tagger's label set.
pub const NONE: &str = "NONE";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaggerError {
    #[error("training data has fewer than two distinct labels")]
    DegenerateLabels,
    #[error("vector of width {found} where {expected} was expected")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JackknifeError {
    #[error("need at least two folds and one sentence per fold ({sentences} sentences, {folds} folds)")]
    TooSmall { sentences: usize, folds: usize },
    #[error("fold {fold}: {source}")]
    Tagger {
        fold: usize,
        #[source]
        source: TaggerError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggerConfig {
    pub l2: f64,
    /// Stop once an accepted step changes the loss by less than this.
    pub tol: f64,
    pub max_iters: usize,
    pub step: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig { l2: 1e-4, tol: 1e-6, max_iters: 2000, step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTagger {
    labels: Vec<String>,
    /// One row per label, `dim` weights followed by the bias.
    weights: Vec<Vec<f64>>,
    dim: usize,
    /// Loss after every accepted step, starting from the initial point.
    pub losses: Vec<f64>,
}

fn scores(weights: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| w[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]).collect()
}

fn log_softmax(s: &[f64]) -> Vec<f64> {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z = m + s.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    s.iter().map(|x| x - z).collect()
}

struct Problem<'a> {
    xs: Vec<&'a [f64]>,
    ys: Vec<usize>,
    l2: f64,
    dim: usize,
}

impl Problem<'_> {
    fn loss(&self, w: &[Vec<f64>]) -> f64 {
        let nll: f64 = self.xs.iter().zip(&self.ys).map(|(x, &y)| -log_softmax(&scores(w, x))[y]).sum();
        let reg: f64 = w.iter().map(|row| row[..self.dim].iter().map(|v| v * v).sum::<f64>()).sum();
        nll / self.xs.len() as f64 + 0.5 * self.l2 * reg
    }

    fn gradient(&self, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.xs.len() as f64;
        let mut g: Vec<Vec<f64>> = w.iter().map(|row| row.iter().map(|_| 0.0).collect()).collect();
        for (x, &y) in self.xs.iter().zip(&self.ys) {
            let p = log_softmax(&scores(w, x));
            for (c, row) in g.iter_mut().enumerate() {
                let d = (p[c].exp() - if c == y { 1.0 } else { 0.0 }) / n;
                for (gi, xi) in row.iter_mut().zip(x.iter()) {
                    *gi += d * xi;
                }
                row[self.dim] += d;
            }
        }
        for (row, wr) in g.iter_mut().zip(w) {
            for k in 0..self.dim {
                row[k] += self.l2 * wr[k];
            }
        }
        g
    }
}

/// Trains by full-batch gradient descent on the mean log loss plus an L2
/// penalty on the weights. A step that would raise the loss is halved and
/// retried, so the recorded losses never increase.
pub fn train_linear_tagger(examples: &[(Vec<f64>, String)], cfg: &TaggerConfig) -> Result<LinearTagger, TaggerError> {
    let mut labels: Vec<String> = examples.iter().map(|(_, l)| l.clone()).collect();
    labels.sort();
    labels.dedup();
    if labels.len() < 2 {
        return Err(TaggerError::DegenerateLabels);
    }
    if !labels.iter().any(|l| l == NONE) {
        labels.push(NONE.to_string());
        labels.sort();
    }
    let dim = examples[0].0.len();
    if let Some((x, _)) = examples.iter().find(|(x, _)| x.len() != dim) {
        return Err(TaggerError::DimensionMismatch { expected: dim, found: x.len() });
    }
    let problem = Problem {
        xs: examples.iter().map(|(x, _)| x.as_slice()).collect(),
        ys: examples.iter().map(|(_, l)| labels.binary_search(l).expect("label listed")).collect(),
        l2: cfg.l2,
        dim,
    };
    let mut w = vec![vec![0.0; dim + 1]; labels.len()];
    let mut loss = problem.loss(&w);
    let mut losses = vec![loss];
    let mut step = cfg.step;
    let mut iters = 0;
    while iters < cfg.max_iters && step > 1e-12 {
        let g = problem.gradient(&w);
        let trial: Vec<Vec<f64>> =
            w.iter().zip(&g).map(|(row, gr)| row.iter().zip(gr).map(|(a, b)| a - step * b).collect()).collect();
        let next = problem.loss(&trial);
        if next > loss {
            step /= 2.0;
            continue;
        }
        iters += 1;
        w = trial;
        let delta = loss - next;
        loss = next;
        losses.push(loss);
        if delta < cfg.tol {
            break;
        }
    }
    Ok(LinearTagger { labels, weights: w, dim, losses })
}

impl LinearTagger {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Label log-probabilities for one vector.
    pub fn log_probs(&self, x: &[f64]) -> Result<Vec<f64>, TaggerError> {
        if x.len() != self.dim {
            return Err(TaggerError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok(log_softmax(&scores(&self.weights, x)))
    }

    /// Highest-scoring label; ties go to the earlier label.
    pub fn predict(&self, x: &[f64]) -> Result<&str, TaggerError> {
        let lp = self.log_probs(x)?;
        let best = (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b });
        Ok(&self.labels[best])
    }

    /// Tags each word independently.
    pub fn tag(&self, vectors: &[Vec<f64>]) -> Result<Vec<String>, TaggerError> {
        vectors.iter().map(|v| self.predict(v).map(String::from)).collect()
    }
}

/// Tags every sentence with a tagger trained on the other folds; sentence
/// `i` belongs to fold `i % folds`.
pub fn jackknife_tags(
    corpus: &[Vec<(Vec<f64>, String)>],
    folds: usize,
    cfg: &TaggerConfig,
) -> Result<Vec<Vec<String>>, JackknifeError> {
    if folds < 2 || corpus.len() < folds {
        return Err(JackknifeError::TooSmall { sentences: corpus.len(), folds });
    }
    let mut out = vec![Vec::new(); corpus.len()];
    for fold in 0..folds {
        let train: Vec<(Vec<f64>, String)> =
            corpus.iter().enumerate().filter(|(i, _)| i % folds != fold).flat_map(|(_, s)| s.iter().cloned()).collect();
        let tagger = train_linear_tagger(&train, cfg).map_err(|source| JackknifeError::Tagger { fold, source })?;
        for (i, sentence) in corpus.iter().enumerate().filter(|(i, _)| i % folds == fold) {
            let xs: Vec<Vec<f64>> = sentence.iter().map(|(x, _)| x.clone()).collect();
            out[i] = tagger.tag(&xs).map_err(|source| JackknifeError::Tagger { fold, source })?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<(Vec<f64>, String)> {
        vec![
            (vec![1.0, 0.2], "boy".into()),
            (vec![0.9, -0.1], "boy".into()),
            (vec![-1.0, 0.3], NONE.into()),
            (vec![-0.8, -0.4], NONE.into()),
            (vec![0.1, 2.0], "want-01".into()),
            (vec![-0.2, 1.7], "want-01".into()),
        ]
    }

    #[test]
    fn separable_set_is_learned() {
        let t = train_linear_tagger(&toy(), &TaggerConfig::default()).unwrap();
        for (x, y) in toy() {
            assert_eq!(t.predict(&x).unwrap(), y);
        }
        assert!(t.losses.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn none_is_always_a_label() {
        let data = vec![(vec![1.0], "a".to_string()), (vec![-1.0], "b".to_string())];
        let t = train_linear_tagger(&data, &TaggerConfig::default()).unwrap();
        assert_eq!(t.labels(), ["NONE", "a", "b"]);
    }

    #[test]
    fn single_label_rejected() {
        let data = vec![(vec![1.0], "a".to_string()), (vec![2.0], "a".to_string())];
        assert_eq!(train_linear_tagger(&data, &TaggerConfig::default()), Err(TaggerError::DegenerateLabels));
        assert_eq!(train_linear_tagger(&[], &TaggerConfig::default()), Err(TaggerError::DegenerateLabels));
    }

    #[test]
    fn duplicated_data_same_decisions() {
        let cfg = TaggerConfig::default();
        let once = train_linear_tagger(&toy(), &cfg).unwrap();
        let twice = train_linear_tagger(&[toy(), toy()].concat(), &cfg).unwrap();
        for i in -10..=10 {
            for j in -10..=10 {
                let x = [i as f64 / 4.0, j as f64 / 4.0];
                assert_eq!(once.predict(&x).unwrap(), twice.predict(&x).unwrap());
            }
        }
    }

    #[test]
    fn jackknife_folds() {
        let corpus: Vec<Vec<(Vec<f64>, String)>> = [toy(), toy()].concat().into_iter().map(|e| vec![e]).collect();
        assert!(matches!(jackknife_tags(&corpus, 1, &TaggerConfig::default()), Err(JackknifeError::TooSmall { .. })));
        assert!(matches!(jackknife_tags(&corpus, 13, &TaggerConfig::default()), Err(JackknifeError::TooSmall { .. })));
        let a = jackknife_tags(&corpus, 6, &TaggerConfig::default()).unwrap();
        let b = jackknife_tags(&corpus, 6, &TaggerConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| t.len() == 1));
    }
}
