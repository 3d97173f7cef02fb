//! Agreement between predicted likelihoods and measured run coverage.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::sdg::VertexId;

/// Block sizes as fractions of the ranking length.
pub const BLOCKS: [f64; 7] = [0.01, 0.02, 0.05, 0.10, 0.20, 0.40, 0.80];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("empty ranking")]
    EmptyRanking,
    #[error("rankings cover different vertex sets")]
    Mismatch,
    #[error("block fraction must be in (0, 1]")]
    BadFraction,
}

/// Vertex ids ordered by value descending, then id ascending.
pub fn ranking(values: &[(VertexId, f64)]) -> Vec<VertexId> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(id, _)| id).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingPair {
    pub predicted: Vec<VertexId>,
    pub measured: Vec<VertexId>,
    /// Vertices measured at exactly 1.0.
    pub plateau: usize,
}

impl RankingPair {
    pub fn new(predicted: Vec<VertexId>, measured: Vec<VertexId>) -> Result<Self, EvalError> {
        let (mut a, mut b) = (predicted.clone(), measured.clone());
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(EvalError::Mismatch);
        }
        Ok(RankingPair { predicted, measured, plateau: 0 })
    }

    pub fn from_values(predicted: &[(VertexId, f64)], measured: &[(VertexId, f64)]) -> Result<Self, EvalError> {
        let mut pair = Self::new(ranking(predicted), ranking(measured))?;
        pair.plateau = measured.iter().filter(|(_, f)| *f == 1.0).count();
        Ok(pair)
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }
}

/// m = ceil(f·N), kept within [1, N].
pub fn block_size(f: f64, n: usize) -> usize {
    ((f * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockScore {
    pub fraction: f64,
    pub m: usize,
    pub k: usize,
    pub score: f64,
    pub random_baseline: f64,
}

fn overlap(a: &[VertexId], b: &[VertexId]) -> usize {
    let mut x = a.to_vec();
    x.sort_unstable();
    b.iter().filter(|v| x.binary_search(v).is_ok()).count()
}

/// Wall's unweighted matching on the top `f` of both rankings.
pub fn wall_score(pair: &RankingPair, f: f64) -> Result<BlockScore, EvalError> {
    if pair.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    if !(f > 0.0 && f <= 1.0) {
        return Err(EvalError::BadFraction);
    }
    let n = pair.len();
    let m = block_size(f, n);
    let k = overlap(&pair.predicted[..m], &pair.measured[..m]);
    Ok(BlockScore { fraction: f, m, k, score: k as f64 / m as f64, random_baseline: m as f64 / n as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub plateau: usize,
    pub blocks: Vec<BlockScore>,
}

pub fn correlation_report(pair: &RankingPair) -> Result<CorrelationReport, EvalError> {
    let blocks = BLOCKS.iter().map(|&f| wall_score(pair, f)).collect::<Result<_, _>>()?;
    Ok(CorrelationReport { n: pair.len(), plateau: pair.plateau, blocks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyRow {
    pub interval: &'static str,
    /// Vertices whose prediction falls in the interval.
    pub predicted: usize,
    /// Of those, how many were measured at the boundary value.
    pub confirmed: usize,
    /// `None` when no prediction falls in the interval.
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub always: Vec<AccuracyRow>,
    pub never: Vec<AccuracyRow>,
}

fn row(interval: &'static str, pairs: &[(f64, f64)], pick: impl Fn(f64) -> bool, target: f64) -> AccuracyRow {
    let inside: Vec<f64> = pairs.iter().filter(|(p, _)| pick(*p)).map(|(_, m)| *m).collect();
    let confirmed = inside.iter().filter(|&&m| m == target).count();
    let percent = (!inside.is_empty()).then(|| 100.0 * confirmed as f64 / inside.len() as f64);
    AccuracyRow { interval, predicted: inside.len(), confirmed, percent }
}

/// `predicted[i]` and `measured[i]` describe the same vertex.
pub fn threshold_accuracy(predicted: &[f64], measured: &[f64]) -> Result<AccuracyTable, EvalError> {
    if predicted.len() != measured.len() {
        return Err(EvalError::Mismatch);
    }
    let pairs: Vec<(f64, f64)> = predicted.iter().copied().zip(measured.iter().copied()).collect();
    Ok(AccuracyTable {
        always: vec![
            row("=1", &pairs, |p| p == 1.0, 1.0),
            row(">0.99", &pairs, |p| p > 0.99, 1.0),
            row(">0.98", &pairs, |p| p > 0.98, 1.0),
            row(">0.95", &pairs, |p| p > 0.95, 1.0),
        ],
        never: vec![
            row("=0", &pairs, |p| p == 0.0, 0.0),
            row("<0.01", &pairs, |p| p < 0.01, 0.0),
            row("<0.02", &pairs, |p| p < 0.02, 0.0),
            row("<0.05", &pairs, |p| p < 0.05, 0.0),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockMean {
    pub fraction: f64,
    pub m: usize,
    pub mean: f64,
}

/// Mean measured fraction over each top block of the predicted ranking.
pub fn block_likelihood_table(
    predicted: &[(VertexId, f64)],
    measured: &[(VertexId, f64)],
) -> Result<Vec<BlockMean>, EvalError> {
    if predicted.is_empty() {
        return Err(EvalError::EmptyRanking);
    }
    let pair = RankingPair::from_values(predicted, measured)?;
    let lookup: std::collections::HashMap<VertexId, f64> = measured.iter().copied().collect();
    let n = pair.len();
    Ok(BLOCKS
        .iter()
        .map(|&f| {
            let m = block_size(f, n);
            let sum: f64 = pair.predicted[..m].iter().map(|v| lookup[v]).sum();
            BlockMean { fraction: f, m, mean: sum / m as f64 }
        })
        .collect())
}

/// Mean and standard error of each block score when a random permutation
/// of `n` items is compared against a fixed ranking.
pub fn shuffle_baseline(n: usize, trials: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fixed: Vec<VertexId> = (0..n as u32).map(VertexId).collect();
    let mut sums = [0.0f64; BLOCKS.len()];
    let mut sq = [0.0f64; BLOCKS.len()];
    let mut shuffled = fixed.clone();
    for _ in 0..trials {
        shuffled.shuffle(&mut rng);
        for (i, &f) in BLOCKS.iter().enumerate() {
            let m = block_size(f, n);
            let s = overlap(&fixed[..m], &shuffled[..m]) as f64 / m as f64;
            sums[i] += s;
            sq[i] += s * s;
        }
    }
    let t = trials as f64;
    (0..BLOCKS.len())
        .map(|i| {
            let mean = sums[i] / t;
            let var = (sq[i] / t - mean * mean).max(0.0) * t / (t - 1.0).max(1.0);
            (mean, (var / t).sqrt())
        })
        .collect()
}

/// Everything `eval` reports for one branch model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEvaluation {
    pub model: String,
    pub correlation: CorrelationReport,
    pub block_means: Vec<BlockMean>,
    pub accuracy: AccuracyTable,
}

pub fn evaluate(
    model: &str,
    predicted: &[(VertexId, f64)],
    measured: &[(VertexId, f64)],
) -> Result<ModelEvaluation, EvalError> {
    let pair = RankingPair::from_values(predicted, measured)?;
    let lookup: std::collections::HashMap<VertexId, f64> = measured.iter().copied().collect();
    let p: Vec<f64> = predicted.iter().map(|(_, x)| *x).collect();
    let m: Vec<f64> = predicted.iter().map(|(v, _)| lookup[v]).collect();
    Ok(ModelEvaluation {
        model: model.to_string(),
        correlation: correlation_report(&pair)?,
        block_means: block_likelihood_table(predicted, measured)?,
        accuracy: threshold_accuracy(&p, &m)?,
    })
}

fn pct(b: f64) -> String {
    format!("{}%", (b * 100.0).round())
}

fn joined<T>(evals: &[ModelEvaluation], get: impl Fn(&ModelEvaluation) -> T, fmt: impl Fn(T) -> String) -> String {
    evals.iter().map(|e| fmt(get(e))).collect::<Vec<_>>().join(" - ")
}

/// Markdown tables; with several models each cell lists their values
/// joined by " - ". `shuffled` adds the mean score of random rankings.
pub fn render_markdown(
    title: &str,
    run_count: usize,
    evals: &[ModelEvaluation],
    shuffled: Option<&[(f64, f64)]>,
) -> String {
    let mut out = String::new();
    let Some(first) = evals.first() else { return out };
    let models: Vec<&str> = evals.iter().map(|e| e.model.as_str()).collect();
    let _ = writeln!(out, "# {title}\n");
    let _ = writeln!(
        out,
        "models: {} | control points: {} | runs: {run_count} | measured 1.0 plateau: {}\n",
        models.join(" - "),
        first.correlation.n,
        first.correlation.plateau
    );
    let header: Vec<String> = BLOCKS.iter().map(|&b| pct(b)).collect();
    let rule = vec!["---"; BLOCKS.len() + 1].join("|");

    let _ = writeln!(out, "## Correlation (Wall)\n\n| block | {} |\n|{rule}|", header.join(" | "));
    let cells = |f: &dyn Fn(&ModelEvaluation, usize) -> String| -> String {
        (0..BLOCKS.len())
            .map(|i| evals.iter().map(|e| f(e, i)).collect::<Vec<_>>().join(" - "))
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let _ = writeln!(out, "| score | {} |", cells(&|e, i| format!("{:.2}", e.correlation.blocks[i].score)));
    let baseline: Vec<String> = first.correlation.blocks.iter().map(|b| format!("{:.2}", b.random_baseline)).collect();
    let _ = writeln!(out, "| random (m/N) | {} |", baseline.join(" | "));
    if let Some(sh) = shuffled {
        let cells: Vec<String> = sh.iter().map(|(mean, _)| format!("{mean:.2}")).collect();
        let _ = writeln!(out, "| shuffled | {} |", cells.join(" | "));
    }
    let ms: Vec<String> = first.correlation.blocks.iter().map(|b| b.m.to_string()).collect();
    let _ = writeln!(out, "| m | {} |\n", ms.join(" | "));

    let _ = writeln!(out, "## Average measured likelihood\n\n| block | {} |\n|{rule}|", header.join(" | "));
    let _ = writeln!(out, "| mean | {} |\n", cells(&|e, i| format!("{:.2}", e.block_means[i].mean)));

    for (name, rows) in [("always executed", 0usize), ("never executed", 1)] {
        let pick = |e: &ModelEvaluation| if rows == 0 { e.accuracy.always.clone() } else { e.accuracy.never.clone() };
        let labels: Vec<&str> = pick(first).iter().map(|r| r.interval).collect();
        let _ = writeln!(out, "## Accuracy, {name}\n\n| interval | {} |", labels.join(" | "));
        let _ = writeln!(out, "|{}|", vec!["---"; labels.len() + 1].join("|"));
        let row: Vec<String> = (0..labels.len())
            .map(|i| {
                joined(
                    evals,
                    |e| pick(e)[i].percent,
                    |p| match p {
                        Some(p) => format!("{p:.0}"),
                        None => "n/a".into(),
                    },
                )
            })
            .collect();
        let _ = writeln!(out, "| % | {} |", row.join(" | "));
        let counts: Vec<String> =
            (0..labels.len()).map(|i| joined(evals, |e| pick(e)[i].predicted, |c| c.to_string())).collect();
        let _ = writeln!(out, "| count | {} |\n", counts.join(" | "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> Vec<VertexId> {
        v.iter().copied().map(VertexId).collect()
    }

    #[test]
    fn block_sizes() {
        assert_eq!(block_size(0.01, 100), 1);
        assert_eq!(block_size(0.01, 101), 2);
        assert_eq!(block_size(0.8, 10), 8);
        assert_eq!(block_size(0.01, 10), 1);
        assert_eq!(block_size(1.0, 7), 7);
    }

    #[test]
    fn partial_overlap() {
        // N = 10, f = 0.3 gives m = 3; tops {0,1,2} and {0,1,9} share 2.
        let pair =
            RankingPair::new(ids(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]), ids(&[1, 0, 9, 2, 3, 4, 5, 6, 7, 8])).unwrap();
        let s = wall_score(&pair, 0.3).unwrap();
        assert_eq!((s.m, s.k), (3, 2));
        assert!((s.score - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let empty = RankingPair::new(vec![], vec![]).unwrap();
        assert_eq!(wall_score(&empty, 0.1), Err(EvalError::EmptyRanking));
        assert_eq!(RankingPair::new(ids(&[1]), ids(&[2])), Err(EvalError::Mismatch));
        let one = RankingPair::new(ids(&[1]), ids(&[1])).unwrap();
        assert_eq!(wall_score(&one, 0.0), Err(EvalError::BadFraction));
    }

    #[test]
    fn empty_interval_is_not_zero() {
        let t = threshold_accuracy(&[0.5], &[1.0]).unwrap();
        assert!(t.always.iter().all(|r| r.percent.is_none()));
        assert_eq!(t.never[3].percent, None);
    }

    #[test]
    fn ranking_ties_by_id() {
        let r = ranking(&[(VertexId(3), 0.5), (VertexId(1), 0.5), (VertexId(2), 0.9)]);
        assert_eq!(r, ids(&[2, 1, 3]));
    }
}
