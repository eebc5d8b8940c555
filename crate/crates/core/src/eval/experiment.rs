use rayon::prelude::*;
use serde::Serialize;

use super::{loo_split, mse, pearson, r2};
use crate::beat::Beat;
use crate::error::{Error, Result};
use crate::fusion::{DatasetMatrix, PieceMatrix, SingularBasis};
use crate::models::{train, Sequence, TrainConfig, Variant};
use crate::targets::TargetVector;

/// One piece of a corpus: its fused matrix and standardized targets.
#[derive(Debug, Clone)]
pub struct CorpusPiece {
    pub matrix: PieceMatrix,
    pub targets: TargetVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub variants: Vec<Variant>,
    pub train: TrainConfig,
    /// Worker threads for folds; 0 lets rayon decide.
    pub jobs: usize,
}

impl ExperimentConfig {
    pub fn new(variants: Vec<Variant>, train: TrainConfig) -> ExperimentConfig {
        ExperimentConfig { variants, train, jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "message", rename_all = "lowercase")]
pub enum FoldStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub piece_id: String,
    pub variant: Variant,
    pub mse: f64,
    pub r2: f64,
    /// `None` when the prediction is constant.
    pub pearson: Option<f64>,
    /// MSE in loudness units after undoing the standardization.
    pub raw_mse: f64,
    pub train_pieces: Vec<String>,
    pub validation_pieces: Vec<String>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub status: FoldStatus,
}

impl FoldReport {
    pub fn is_ok(&self) -> bool {
        self.status == FoldStatus::Ok
    }
}

/// Actual and predicted standardized loudness of one test piece.
#[derive(Debug, Clone)]
pub struct PieceCurve {
    pub piece_id: String,
    pub onsets: Vec<Beat>,
    pub actual: Vec<f64>,
    /// One entry per evaluated variant; `None` if its fold failed.
    pub predicted: Vec<(Variant, Option<Vec<f64>>)>,
}

impl PieceCurve {
    /// `onset_num,onset_den,actual,predicted`; with several variants the
    /// prediction columns are `predicted_<variant>`. Failed folds leave
    /// empty cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("onset_num,onset_den,actual");
        if self.predicted.len() == 1 {
            out.push_str(",predicted");
        } else {
            for (v, _) in &self.predicted {
                out.push_str(&format!(",predicted_{}", v.short()));
            }
        }
        out.push('\n');
        for (i, (o, a)) in self.onsets.iter().zip(&self.actual).enumerate() {
            out.push_str(&format!("{},{},{a:?}", o.numer(), o.denom()));
            for (_, p) in &self.predicted {
                match p {
                    Some(p) => out.push_str(&format!(",{:?}", p[i])),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Piece-major, variants in configured order.
    pub folds: Vec<FoldReport>,
    pub curves: Vec<PieceCurve>,
    pub singular: Vec<SingularBasis>,
    pub fingerprint: String,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn fold(&self, piece_id: &str, variant: Variant) -> Option<&FoldReport> {
        self.folds.iter().find(|f| f.piece_id == piece_id && f.variant == variant)
    }

    pub fn piece_ids(&self) -> Vec<&str> {
        self.curves.iter().map(|c| c.piece_id.as_str()).collect()
    }

    /// `piece,variant,mse,r2,r,raw_mse,best_epoch,epochs,status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("piece,variant,mse,r2,r,raw_mse,best_epoch,epochs,status\n");
        for f in &self.folds {
            let r = f.pearson.map(|v| format!("{v:?}")).unwrap_or_default();
            let status = match &f.status {
                FoldStatus::Ok => "ok".to_string(),
                FoldStatus::Failed(m) => format!("\"failed: {}\"", m.replace('"', "'")),
            };
            out.push_str(&format!(
                "{},{},{:?},{:?},{r},{:?},{},{},{status}\n",
                f.piece_id,
                f.variant.short(),
                f.mse,
                f.r2,
                f.raw_mse,
                f.best_epoch,
                f.epochs
            ));
        }
        out
    }

    /// `class,label,piece`.
    pub fn singular_csv(&self) -> String {
        let mut out = String::from("class,label,piece\n");
        for s in &self.singular {
            out.push_str(&format!("{},{},{}\n", s.class, s.label, s.piece_id));
        }
        out
    }
}

struct Fold {
    piece: usize,
    variant: Variant,
}

/// Leave-one-out evaluation of every configured variant on every piece.
///
/// Fold failures are recorded and the remaining folds still run; only
/// malformed input or configuration is returned as an error.
pub fn run_experiment(corpus: &[CorpusPiece], config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.train.validate()?;
    if config.variants.is_empty() {
        return Err(Error::Config("no model variants selected".into()));
    }
    for p in corpus {
        if p.matrix.n_rows() != p.targets.values.len() {
            return Err(Error::Contract(format!(
                "piece {}: {} rows but {} targets",
                p.matrix.piece_id,
                p.matrix.n_rows(),
                p.targets.values.len()
            )));
        }
    }
    let matrices: Vec<PieceMatrix> = corpus.iter().map(|p| p.matrix.clone()).collect();
    let mut dataset = DatasetMatrix::assemble(&matrices)?;
    let singular = dataset.singular_bases();
    dataset.append_constant_column();
    let fingerprint = dataset.fingerprint();

    // dataset order is sorted by id; line the targets up with it
    let targets: Vec<&TargetVector> = dataset
        .pieces
        .iter()
        .map(|b| &corpus.iter().find(|p| p.matrix.piece_id == b.piece_id).unwrap().targets)
        .collect();
    let sequences: Vec<Sequence> = (0..dataset.pieces.len())
        .map(|i| Sequence::new(dataset.dense(i), targets[i].values.clone()))
        .collect::<Result<_>>()?;
    let n = sequences.len();
    // surface split errors before spawning anything
    loo_split(n, 0, config.train.validation_pieces, config.train.seed)?;

    let folds: Vec<Fold> = (0..n)
        .flat_map(|piece| config.variants.iter().map(move |&variant| Fold { piece, variant }))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<(FoldReport, Option<Vec<f64>>)> = pool.install(|| {
        folds
            .par_iter()
            .map(|f| run_fold(f, &dataset, &sequences, &targets, &config.train))
            .collect()
    });

    let mut curves = Vec::with_capacity(n);
    let mut reports = Vec::with_capacity(results.len());
    let mut it = results.into_iter();
    for (i, block) in dataset.pieces.iter().enumerate() {
        let mut predicted = Vec::new();
        for &v in &config.variants {
            let (report, pred) = it.next().expect("one result per fold");
            if let FoldStatus::Failed(m) = &report.status {
                log::warn!("{} / {}: {m}", block.piece_id, v);
            }
            predicted.push((v, pred));
            reports.push(report);
        }
        curves.push(PieceCurve {
            piece_id: block.piece_id.clone(),
            onsets: block.onsets.clone(),
            actual: sequences[i].y.clone(),
            predicted,
        });
    }
    Ok(ExperimentReport { folds: reports, curves, singular, fingerprint, config: config.clone() })
}

fn run_fold(
    fold: &Fold,
    dataset: &DatasetMatrix,
    sequences: &[Sequence],
    targets: &[&TargetVector],
    config: &TrainConfig,
) -> (FoldReport, Option<Vec<f64>>) {
    let spec = loo_split(sequences.len(), fold.piece, config.validation_pieces, config.seed).expect("checked");
    let ids = |ix: &[usize]| ix.iter().map(|&i| dataset.pieces[i].piece_id.clone()).collect::<Vec<_>>();
    let mut report = FoldReport {
        piece_id: dataset.pieces[fold.piece].piece_id.clone(),
        variant: fold.variant,
        mse: f64::NAN,
        r2: f64::NAN,
        pearson: None,
        raw_mse: f64::NAN,
        train_pieces: ids(&spec.train),
        validation_pieces: ids(&spec.validation),
        best_epoch: 0,
        epochs: 0,
        seed: config.seed,
        status: FoldStatus::Ok,
    };
    let pick = |ix: &[usize]| ix.iter().map(|&i| sequences[i].clone()).collect::<Vec<_>>();
    let test = &sequences[fold.piece];
    let outcome = train(fold.variant, &pick(&spec.train), &pick(&spec.validation), config).and_then(|o| {
        let yhat = o.params.predict(&test.x)?;
        if yhat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite prediction".into()));
        }
        Ok((o, yhat))
    });
    match outcome {
        Ok((o, yhat)) => {
            report.best_epoch = o.trace.best_epoch;
            report.epochs = o.trace.train_loss.len();
            let scored = (|| -> Result<()> {
                report.mse = mse(&test.y, &yhat)?;
                report.r2 = r2(&test.y, &yhat)?;
                report.pearson = match pearson(&test.y, &yhat) {
                    Ok(r) => Some(r),
                    Err(Error::UndefinedCorrelation) => None,
                    Err(e) => return Err(e),
                };
                let t = targets[fold.piece];
                report.raw_mse = mse(&t.destandardize(&test.y), &t.destandardize(&yhat))?;
                Ok(())
            })();
            if let Err(e) = scored {
                report.status = FoldStatus::Failed(e.to_string());
            }
            (report, Some(yhat))
        }
        Err(e) => {
            report.status = FoldStatus::Failed(e.to_string());
            (report, None)
        }
    }
}
