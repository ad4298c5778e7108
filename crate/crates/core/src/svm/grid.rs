use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::KernelSpec;
use super::model::SvmModel;
use super::platt::platt_fit;
use super::smo::{smo_train, SmoParams};
use crate::corpus::{stratified_folds, PrivacyLabel};
use crate::error::{Error, Result};
use crate::eval::weighted_f1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub kernels: Vec<KernelSpec>,
    pub folds: usize,
}

impl Default for GridSpec {
    /// C in {0.001, 0.01, 0.1, 1, 2, 5, 10}; RBF gamma in {0.01, 0.1, 1}; degree in {1, 2, 3}.
    fn default() -> Self {
        GridSpec {
            c_values: vec![0.001, 0.01, 0.1, 1.0, 2.0, 5.0, 10.0],
            kernels: vec![
                KernelSpec::Rbf { gamma: 0.01 },
                KernelSpec::Rbf { gamma: 0.1 },
                KernelSpec::Rbf { gamma: 1.0 },
                KernelSpec::Poly { degree: 1 },
                KernelSpec::Poly { degree: 2 },
                KernelSpec::Poly { degree: 3 },
            ],
            folds: 10,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.kernels.is_empty() {
            return Err(Error::arg("grid needs at least one C and one kernel"));
        }
        if self.folds < 2 {
            return Err(Error::arg(format!("grid needs at least 2 folds, got {}", self.folds)));
        }
        if let Some(c) = self.c_values.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::arg(format!("C must be positive, got {c}")));
        }
        self.kernels.iter().try_for_each(KernelSpec::validate)
    }

    /// Every (C, kernel) pair, C-major.
    pub fn cells(&self) -> Vec<(f64, KernelSpec)> {
        self.c_values
            .iter()
            .flat_map(|&c| self.kernels.iter().map(move |&k| (c, k)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub c: f64,
    pub kernel: KernelSpec,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_kernel: KernelSpec,
    pub best_c: f64,
    pub best_f1: f64,
    pub table: Vec<CvCell>,
}

impl GridResult {
    /// Tab-separated CV table: `c kernel mean_f1 fold_f1... error`.
    pub fn table_tsv(&self) -> String {
        let mut out = String::from("c\tkernel\tmean_weighted_f1\tfold_weighted_f1\terror\n");
        for cell in &self.table {
            let folds: Vec<String> = cell.fold_f1.iter().map(|f| format!("{f:.6}")).collect();
            out.push_str(&format!(
                "{}\t{}\t{:.6}\t{}\t{}\n",
                cell.c,
                cell.kernel,
                cell.mean_f1,
                folds.join(","),
                cell.error.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

fn subset<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn cv_cell(x: &[Vec<f64>], y: &[PrivacyLabel], folds: &[usize], k: usize, c: f64, kernel: KernelSpec) -> CvCell {
    let mut fold_f1 = Vec::with_capacity(k);
    let params = SmoParams::new(c, kernel);
    for f in 0..k {
        let (train, test): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| folds[i] != f);
        let result = smo_train(&subset(x, &train), &subset(y, &train), &params).and_then(|m| {
            let preds = test.iter().map(|&i| m.predict(&x[i])).collect::<Result<Vec<_>>>()?;
            weighted_f1(&preds, &subset(y, &test))
        });
        match result {
            Ok(score) => fold_f1.push(score),
            Err(e) => {
                return CvCell {
                    c,
                    kernel,
                    fold_f1,
                    mean_f1: f64::NAN,
                    error: Some(e.to_string()),
                }
            }
        }
    }
    let mean_f1 = fold_f1.iter().sum::<f64>() / k as f64;
    CvCell {
        c,
        kernel,
        fold_f1,
        mean_f1,
        error: None,
    }
}

/// Higher mean F1 first, then smaller C, then RBF before polynomial, then smaller parameter.
fn rank_cells(a: &CvCell, b: &CvCell) -> Ordering {
    b.mean_f1.total_cmp(&a.mean_f1).then(a.c.total_cmp(&b.c)).then_with(|| {
        let (ka, pa) = a.kernel.rank();
        let (kb, pb) = b.kernel.rank();
        ka.cmp(&kb).then(pa.total_cmp(&pb))
    })
}

/// Stratified k-fold search over the grid selecting by mean weighted F1.
///
/// Cells whose training fails are kept in the table with their error. With `parallel`
/// the cells run on the rayon pool; the result is identical either way.
pub fn grid_search_cv(x: &[Vec<f64>], y: &[PrivacyLabel], grid: &GridSpec, seed: u64, parallel: bool) -> Result<GridResult> {
    grid.validate()?;
    if x.len() != y.len() {
        return Err(Error::arg(format!("{} points but {} labels", x.len(), y.len())));
    }
    let folds = stratified_folds(y, grid.folds, seed)?;
    let cells = grid.cells();
    let run = |&(c, k): &(f64, KernelSpec)| cv_cell(x, y, &folds, grid.folds, c, k);
    let table: Vec<CvCell> = if parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    };
    let best = table
        .iter()
        .filter(|c| c.error.is_none())
        .min_by(|a, b| rank_cells(a, b))
        .ok_or_else(|| {
            let first = table.iter().find_map(|c| c.error.clone()).unwrap_or_default();
            Error::arg(format!("every grid cell failed; first error: {first}"))
        })?;
    Ok(GridResult {
        best_kernel: best.kernel,
        best_c: best.c,
        best_f1: best.mean_f1,
        table: table.clone(),
    })
}

/// Trains on all data and attaches a Platt calibrator fitted on out-of-fold decision
/// values from a 3-fold split. When the minority class has fewer than three items the
/// calibrator falls back to in-sample decision values.
pub fn train_calibrated(x: &[Vec<f64>], y: &[PrivacyLabel], params: &SmoParams, seed: u64) -> Result<SvmModel> {
    const CAL_FOLDS: usize = 3;
    let mut model = smo_train(x, y, params)?;
    let minority = y
        .iter()
        .filter(|l| l.is_private())
        .count()
        .min(y.iter().filter(|l| !l.is_private()).count());
    let mut values = vec![0.0; x.len()];
    if minority >= CAL_FOLDS {
        let folds = stratified_folds(y, CAL_FOLDS, seed)?;
        for f in 0..CAL_FOLDS {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| folds[i] != f);
            let fold_model = smo_train(&subset(x, &train), &subset(y, &train), params)?;
            for i in test {
                values[i] = fold_model.decision_value(&x[i])?;
            }
        }
    } else {
        for (v, xi) in values.iter_mut().zip(x) {
            *v = model.decision_value(xi)?;
        }
    }
    model.calibrator = Some(platt_fit(&values, y)?);
    Ok(model)
}
