//! Sparse matrices for recommendation-style runs: Matrix Market and CSV
//! coordinate readers, a Matrix Market writer, and a synthetic generator.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use sqp::{stream, DistributionSpec};

/// A parse failure with the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct IngestError {
    pub line: usize,
    pub message: String,
}

fn fail<T>(line: usize, message: impl Into<String>) -> Result<T, IngestError> {
    Err(IngestError {
        line,
        message: message.into(),
    })
}

/// Compressed sparse rows, 0-based, no duplicate coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SparseStats {
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    pub density: f64,
    pub max_row_nnz: usize,
}

impl SparseMatrix {
    /// Builds from 0-based triplets, summing duplicates. Explicit zeros are
    /// kept out of the pattern.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for (i, j, v) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        let mut indptr = vec![0usize; rows + 1];
        for &(i, _, _) in &merged {
            indptr[i + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            rows,
            cols,
            indptr,
            indices: merged.iter().map(|t| t.1).collect(),
            values: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        let (idx, vals) = self.row(i);
        for (&j, &v) in idx.iter().zip(vals) {
            out[j] = v;
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        idx.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Number of columns where rows `a` and `b` are both nonzero.
    pub fn overlap(&self, a: usize, b: usize) -> usize {
        let (ia, _) = self.row(a);
        let (ib, _) = self.row(b);
        let (mut x, mut y, mut c) = (0, 0, 0);
        while x < ia.len() && y < ib.len() {
            match ia[x].cmp(&ib[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    c += 1;
                    x += 1;
                    y += 1;
                }
            }
        }
        c
    }

    pub fn stats(&self) -> SparseStats {
        let cells = (self.rows * self.cols) as f64;
        SparseStats {
            m: self.rows,
            n: self.cols,
            nnz: self.nnz(),
            density: if cells > 0.0 { self.nnz() as f64 / cells } else { 0.0 },
            max_row_nnz: (0..self.rows).map(|i| self.row_nnz(i)).max().unwrap_or(0),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (idx, vals) = self.row(i);
            idx.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    MatrixMarket,
    CsvCoo,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mm" | "mtx" | "matrix-market" => Ok(Self::MatrixMarket),
            "csv" | "csv-coo" => Ok(Self::CsvCoo),
            other => Err(format!("unknown matrix format {other:?} (use matrix-market or csv-coo)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MatrixMarket => "matrix-market",
            Self::CsvCoo => "csv-coo",
        })
    }
}

fn parse_index(tok: &str, bound: usize, what: &str, line: usize) -> Result<usize, IngestError> {
    let v: usize = match tok.parse() {
        Ok(v) => v,
        Err(_) => return fail(line, format!("{what} index {tok:?} is not a positive integer")),
    };
    if v == 0 || v > bound {
        return fail(line, format!("{what} index {v} outside 1..={bound}"));
    }
    Ok(v - 1)
}

fn parse_value(tok: &str, line: usize) -> Result<f64, IngestError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => fail(line, format!("value {tok:?} is not a finite number")),
    }
}

/// Reads `%%MatrixMarket matrix coordinate {real|integer|pattern} {general|symmetric}`.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SparseMatrix, IngestError> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (line_no, header) = match lines.next() {
        Some((k, Ok(l))) => (k, l),
        Some((k, Err(e))) => return fail(k, e.to_string()),
        None => return fail(1, "empty file"),
    };
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return fail(line_no, "expected '%%MatrixMarket matrix coordinate <field> <symmetry>'");
    }
    if fields[2] != "coordinate" {
        return fail(line_no, format!("unsupported layout '{}'; only coordinate", fields[2]));
    }
    let pattern = match fields[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => return fail(line_no, format!("unsupported field '{other}'")),
    };
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return fail(line_no, format!("unsupported symmetry '{other}'")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut stored = 0usize;
    let mut last_line = line_no;
    for (k, line) in lines {
        let line = line.map_err(|e| IngestError {
            line: k,
            message: e.to_string(),
        })?;
        last_line = k;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = t.split_whitespace().collect();
        let Some((m, n, nnz)) = size else {
            if toks.len() != 3 {
                return fail(k, "size line must be 'rows cols nnz'");
            }
            let parse = |s: &str| s.parse::<usize>().map_err(|_| IngestError {
                line: k,
                message: format!("bad size field {s:?}"),
            });
            size = Some((parse(toks[0])?, parse(toks[1])?, parse(toks[2])?));
            triplets.reserve(size.unwrap().2);
            continue;
        };
        if stored >= nnz {
            return fail(k, format!("more than the declared {nnz} entries"));
        }
        let want = if pattern { 2 } else { 3 };
        if toks.len() < want {
            return fail(k, format!("expected {want} fields, found {}", toks.len()));
        }
        let i = parse_index(toks[0], m, "row", k)?;
        let j = parse_index(toks[1], n, "column", k)?;
        let v = if pattern { 1.0 } else { parse_value(toks[2], k)? };
        triplets.push((i, j, v));
        stored += 1;
        if symmetric && i != j {
            triplets.push((j, i, v));
        }
    }
    let Some((m, n, nnz)) = size else {
        return fail(last_line + 1, "missing size line");
    };
    if stored < nnz {
        return fail(last_line + 1, format!("truncated: {stored} of {nnz} declared entries present"));
    }
    Ok(SparseMatrix::from_triplets(m, n, triplets))
}

/// Reads `row,col,value[,...]` with 1-based indices. A first line whose row
/// field is not an integer is taken as a header. Extra columns are ignored.
/// Without `shape` the dimensions are the largest indices seen.
pub fn read_csv_coo<R: std::io::Read>(reader: R, shape: Option<(usize, usize)>) -> Result<SparseMatrix, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let (bm, bn) = shape.unwrap_or((usize::MAX, usize::MAX));
    let mut triplets = Vec::new();
    let (mut m, mut n) = (0usize, 0usize);
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError {
            line: e.position().map_or(k + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(k + 1, |p| p.line() as usize);
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if k == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() < 3 {
            return fail(line, format!("expected row,col,value; found {} fields", rec.len()));
        }
        let i = parse_index(&rec[0], bm, "row", line)?;
        let j = parse_index(&rec[1], bn, "column", line)?;
        let v = parse_value(&rec[2], line)?;
        m = m.max(i + 1);
        n = n.max(j + 1);
        triplets.push((i, j, v));
    }
    let (m, n) = shape.unwrap_or((m, n));
    Ok(SparseMatrix::from_triplets(m, n, triplets))
}

pub fn read_path(path: &std::path::Path, format: Format) -> Result<SparseMatrix, crate::error::CliError> {
    let file = std::fs::File::open(path).map_err(|e| crate::error::CliError::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let m = match format {
        Format::MatrixMarket => read_matrix_market(reader),
        Format::CsvCoo => read_csv_coo(reader, None),
    };
    m.map_err(|e| crate::error::CliError::Data(format!("{}: {e}", path.display())))
}

pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.rows(), a.cols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(w, "{} {} {v:?}", i + 1, j + 1)?;
    }
    Ok(())
}

/// `MxN:density`, e.g. `2000x20000:0.001`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
}

impl FromStr for SyntheticSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("synthetic spec {s:?} must look like 2000x20000:0.001");
        let (dims, density) = s.split_once(':').ok_or_else(bad)?;
        let (r, c) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
        let rows: usize = r.trim().parse().map_err(|_| bad())?;
        let cols: usize = c.trim().parse().map_err(|_| bad())?;
        let density: f64 = density.trim().parse().map_err(|_| bad())?;
        if rows == 0 || cols == 0 || !(density > 0.0 && density <= 1.0) {
            return Err(bad());
        }
        Ok(Self { rows, cols, density })
    }
}

impl fmt::Display for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}:{}", self.rows, self.cols, self.density)
    }
}

/// Each cell is present independently with probability `density` and takes
/// a value from `values`. Row `i` uses stream `(seed, i)`.
pub fn synthetic(spec: &SyntheticSpec, values: &DistributionSpec, seed: u64) -> SparseMatrix {
    let sampler = values.sampler();
    let mut triplets = Vec::new();
    let dense = spec.density >= 0.25;
    for i in 0..spec.rows {
        let mut rng = stream(seed, i as u64);
        if dense {
            for j in 0..spec.cols {
                if spec.density >= 1.0 || rng.random::<f64>() < spec.density {
                    triplets.push((i, j, rng.sample(&sampler)));
                }
            }
        } else {
            // geometric gaps between present cells
            let log_q = (1.0 - spec.density).ln();
            let mut j = 0usize;
            loop {
                let u: f64 = rng.random();
                let gap = ((1.0 - u).ln() / log_q).floor();
                if !gap.is_finite() || j as f64 + gap >= spec.cols as f64 {
                    break;
                }
                j += gap as usize;
                triplets.push((i, j, rng.sample(&sampler)));
                j += 1;
                if j >= spec.cols {
                    break;
                }
            }
        }
    }
    SparseMatrix::from_triplets(spec.rows, spec.cols, triplets)
}
