use crate::error::{Error, Result};

/// Dense row-major feature matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Shape("feature matrix needs at least one column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix given {} values",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }
}

/// Samples observed through several views, with labels and a per-view
/// presence mask. Absent views are skipped by fusion and by the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewBatch {
    classes: usize,
    views: Vec<FeatureMatrix>,
    labels: Vec<usize>,
    /// `n x M`, row-major.
    present: Vec<bool>,
}

impl MultiViewBatch {
    pub fn new(
        classes: usize,
        views: Vec<FeatureMatrix>,
        labels: Vec<usize>,
        present: Vec<bool>,
    ) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Shape("batch needs at least one view".into()));
        }
        let n = labels.len();
        if let Some((m, v)) = views.iter().enumerate().find(|(_, v)| v.rows() != n) {
            return Err(Error::Shape(format!(
                "view {m} has {} rows but there are {n} labels",
                v.rows()
            )));
        }
        if present.len() != n * views.len() {
            return Err(Error::Shape(format!(
                "presence mask has {} entries, expected {}",
                present.len(),
                n * views.len()
            )));
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
            return Err(Error::Shape(format!("label {y} of sample {i} is not below {classes}")));
        }
        Ok(Self {
            classes,
            views,
            labels,
            present,
        })
    }

    /// All views present.
    pub fn complete(classes: usize, views: Vec<FeatureMatrix>, labels: Vec<usize>) -> Result<Self> {
        let present = vec![true; labels.len() * views.len()];
        Self::new(classes, views, labels, present)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn view(&self, m: usize) -> &FeatureMatrix {
        &self.views[m]
    }

    pub fn view_mut(&mut self, m: usize) -> &mut FeatureMatrix {
        &mut self.views[m]
    }

    pub fn view_dims(&self) -> Vec<usize> {
        self.views.iter().map(FeatureMatrix::cols).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn is_present(&self, sample: usize, view: usize) -> bool {
        self.present[sample * self.views.len() + view]
    }

    pub fn set_present(&mut self, sample: usize, view: usize, value: bool) {
        let m = self.views.len();
        self.present[sample * m + view] = value;
    }

    pub fn present_count(&self, sample: usize) -> usize {
        let m = self.views.len();
        self.present[sample * m..(sample + 1) * m].iter().filter(|&&p| p).count()
    }

    /// Features of every view side by side; absent views are zero-filled.
    pub fn concatenated(&self, sample: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.views.iter().map(FeatureMatrix::cols).sum());
        for (m, v) in self.views.iter().enumerate() {
            if self.is_present(sample, m) {
                out.extend_from_slice(v.row(sample));
            } else {
                out.extend(std::iter::repeat_n(0.0, v.cols()));
            }
        }
        out
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let m = self.views.len();
        Self {
            classes: self.classes,
            views: self.views.iter().map(|v| v.select(idx)).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            present: idx
                .iter()
                .flat_map(|&i| self.present[i * m..(i + 1) * m].iter().copied())
                .collect(),
        }
    }
}
