//! Term embeddings and the cosine-similarity matrix over observed PTs.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Result, ShieldError};
use crate::parallel::{map_indexed, Execution};

const BINARY_MAGIC: &[u8; 4] = b"SHEM";
const NORM_TOLERANCE: f64 = 1e-6;

/// Unit-length embedding vectors keyed by term.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f64>,
}

impl EmbeddingStore {
    /// Builds a store from raw single-precision vectors, normalizing any
    /// whose norm is not already 1 (within 1e-6).
    pub fn from_vectors(entries: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let dim = match entries.first() {
            Some((_, v)) => v.len(),
            None => return Err(ShieldError::Schema("embedding source has no terms".into())),
        };
        if dim < 2 {
            return Err(ShieldError::Schema(format!(
                "embedding dimension must be at least 2, got {dim}"
            )));
        }
        let mut terms = Vec::with_capacity(entries.len());
        let mut index = HashMap::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for (term, raw) in entries {
            let term = term.trim().to_string();
            if raw.len() != dim {
                return Err(ShieldError::Schema(format!(
                    "`{term}` has {} components, expected {dim}",
                    raw.len()
                )));
            }
            if index.contains_key(&term) {
                return Err(ShieldError::Schema(format!(
                    "duplicate embedding term `{term}`"
                )));
            }
            let v: Vec<f64> = raw.iter().map(|&x| f64::from(x)).collect();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ShieldError::InvalidVector {
                    term,
                    reason: "non-finite component".into(),
                });
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(ShieldError::InvalidVector {
                    term,
                    reason: "zero norm".into(),
                });
            }
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                vectors.extend(v.iter().map(|x| x / norm));
            } else {
                vectors.extend(v);
            }
            index.insert(term.clone(), terms.len());
            terms.push(term);
        }
        Ok(Self {
            terms,
            index,
            dim,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.index
            .get(term)
            .map(|&i| &self.vectors[i * self.dim..(i + 1) * self.dim])
    }

    /// Terms from `pts` that have no vector, in input order.
    pub fn missing<'a>(&self, pts: &'a [String]) -> Vec<&'a String> {
        pts.iter().filter(|t| !self.contains(t)).collect()
    }
}

/// Loads embeddings, detecting the binary format by its magic bytes and
/// otherwise reading `term,x1,...,xd` CSV (an optional header row is skipped).
pub fn load_embeddings<R: Read>(mut source: R) -> Result<EmbeddingStore> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| ShieldError::io("reading embeddings", e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        load_binary(&bytes)
    } else {
        load_csv(&bytes)
    }
}

fn load_csv(bytes: &[u8]) -> Result<EmbeddingStore> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut entries = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if rec.len() < 2 {
            return Err(ShieldError::Schema(format!(
                "embedding row {} has no vector components",
                n + 1
            )));
        }
        let parsed: std::result::Result<Vec<f32>, _> =
            rec.iter().skip(1).map(str::parse::<f32>).collect();
        match parsed {
            Ok(v) => entries.push((rec[0].to_string(), v)),
            Err(_) if n == 0 => continue,
            Err(_) => {
                return Err(ShieldError::Schema(format!(
                    "embedding row {} for `{}` has a non-numeric component",
                    n + 1,
                    &rec[0]
                )))
            }
        }
    }
    EmbeddingStore::from_vectors(entries)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(ShieldError::Schema(format!(
                "binary embeddings truncated at byte {}",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn load_binary(bytes: &[u8]) -> Result<EmbeddingStore> {
    let mut cur = Cursor { bytes, pos: 4 };
    let count = cur.u32()? as usize;
    let dim = cur.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| ShieldError::Schema("embedding term is not valid UTF-8".into()))?
            .to_string();
        let v = (0..dim).map(|_| cur.f32()).collect::<Result<Vec<_>>>()?;
        entries.push((name, v));
    }
    if cur.pos != bytes.len() {
        return Err(ShieldError::Schema(format!(
            "{} trailing bytes after {count} embeddings",
            bytes.len() - cur.pos
        )));
    }
    EmbeddingStore::from_vectors(entries)
}

/// Writes embeddings in the `SHEM` binary layout.
pub fn write_embeddings_binary<W: Write>(
    entries: &[(String, Vec<f32>)],
    mut sink: W,
) -> Result<()> {
    let dim = entries.first().map_or(0, |(_, v)| v.len());
    let mut out = Vec::new();
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for (name, v) in entries {
        if v.len() != dim {
            return Err(ShieldError::Schema(format!(
                "`{name}` has the wrong dimension"
            )));
        }
        let len = u16::try_from(name.len())
            .map_err(|_| ShieldError::Schema(format!("term name too long: `{name}`")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for x in v {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    sink.write_all(&out)
        .map_err(|e| ShieldError::io("writing binary embeddings", e))
}

/// Symmetric similarity matrix over an ordered list of terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    terms: Vec<String>,
    values: DMatrix<f64>,
}

impl SimilarityMatrix {
    /// Wraps a precomputed matrix. The matrix must be square, symmetric and
    /// match `terms` in size; the diagonal is forced to 1.
    pub fn new(terms: Vec<String>, mut values: DMatrix<f64>) -> Result<Self> {
        let m = terms.len();
        if values.nrows() != m || values.ncols() != m {
            return Err(ShieldError::InvalidArgument(format!(
                "similarity matrix is {}x{} for {m} terms",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..m {
            values[(i, i)] = 1.0;
            for j in 0..i {
                if values[(i, j)] != values[(j, i)] {
                    return Err(ShieldError::InvalidArgument(
                        "similarity matrix is not symmetric".into(),
                    ));
                }
            }
        }
        Ok(Self { terms, values })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    /// Zeroes off-diagonal entries below `tau`; entries equal to `tau` stay.
    pub fn threshold(&self, tau: f64) -> SimilarityMatrix {
        threshold_similarity(self, tau)
    }
}

/// Cosine similarities among `pts`, in the given order.
pub fn cosine_similarity_submatrix(
    store: &EmbeddingStore,
    pts: &[String],
    execution: Execution,
) -> Result<SimilarityMatrix> {
    let missing: Vec<String> = store.missing(pts).into_iter().cloned().collect();
    if !missing.is_empty() {
        return Err(ShieldError::MissingEmbedding { terms: missing });
    }
    let vecs: Vec<&[f64]> = pts.iter().map(|t| store.vector(t).unwrap()).collect();
    let norms: Vec<f64> = vecs
        .iter()
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let m = pts.len();
    // upper triangle per row, mirrored afterwards
    let rows = map_indexed(m, execution, |i| {
        (i + 1..m)
            .map(|j| {
                let dot: f64 = vecs[i].iter().zip(vecs[j]).map(|(a, b)| a * b).sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            })
            .collect::<Vec<f64>>()
    });
    let mut values = DMatrix::identity(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, s) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            values[(i, j)] = s;
            values[(j, i)] = s;
        }
    }
    Ok(SimilarityMatrix {
        terms: pts.to_vec(),
        values,
    })
}

/// Removes weak similarities: off-diagonal entries `< tau` become 0.
pub fn threshold_similarity(s: &SimilarityMatrix, tau: f64) -> SimilarityMatrix {
    let mut values = s.values.clone();
    let m = s.len();
    for i in 0..m {
        for j in 0..m {
            if i != j && values[(i, j)] < tau {
                values[(i, j)] = 0.0;
            }
        }
    }
    SimilarityMatrix {
        terms: s.terms.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store(entries: &[(&str, &[f32])]) -> EmbeddingStore {
        EmbeddingStore::from_vectors(
            entries
                .iter()
                .map(|(t, v)| (t.to_string(), v.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    fn terms(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn loads_csv_with_and_without_header() {
        let a = load_embeddings("a,1,0,0,0\nb,0,1,0,0\n".as_bytes()).unwrap();
        let b = load_embeddings("term,x1,x2,x3,x4\na,1,0,0,0\nb,0,1,0,0\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dim(), 4);
        assert_eq!(a.vector("b").unwrap(), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn normalizes_on_load() {
        let s = load_embeddings("a,3,4\n".as_bytes()).unwrap();
        let v = s.vector("a").unwrap();
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_schema_error() {
        let err = load_embeddings("a,1,0,0,0\nb,1,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ShieldError::Schema(_)), "{err:?}");
    }

    #[test]
    fn zero_vector_is_rejected() {
        let err = load_embeddings("a,0,0,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, ShieldError::InvalidVector { .. }), "{err:?}");
    }

    #[test]
    fn binary_and_csv_load_identically() {
        let entries = vec![
            ("Nausea".to_string(), vec![0.25f32, -1.5, 3.0, 0.125]),
            ("Vomiting".to_string(), vec![1.0f32, 0.1, 0.2, 0.3]),
        ];
        let mut bin = Vec::new();
        write_embeddings_binary(&entries, &mut bin).unwrap();
        let csv: String = entries
            .iter()
            .map(|(t, v)| {
                let xs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!("{t},{}\n", xs.join(","))
            })
            .collect();
        assert_eq!(
            load_embeddings(bin.as_slice()).unwrap(),
            load_embeddings(csv.as_bytes()).unwrap()
        );
    }

    #[test]
    fn truncated_binary_is_schema_error() {
        let entries = vec![("a".to_string(), vec![1.0f32, 2.0])];
        let mut bin = Vec::new();
        write_embeddings_binary(&entries, &mut bin).unwrap();
        bin.pop();
        assert!(matches!(
            load_embeddings(bin.as_slice()),
            Err(ShieldError::Schema(_))
        ));
    }

    #[test]
    fn cosine_closed_forms() {
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let s = store(&[
            ("a", &[1.0, 0.0]),
            ("b", &[h, h]),
            ("c", &[0.0, 1.0]),
            ("d", &[1.0, 0.0]),
        ]);
        let sim =
            cosine_similarity_submatrix(&s, &terms(&["a", "b", "c", "d"]), Execution::Sequential)
                .unwrap();
        assert!((sim.get(0, 1) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-7);
        assert_eq!(sim.get(0, 2), 0.0);
        assert_eq!(sim.get(0, 3), 1.0);
        assert_eq!(sim.get(2, 2), 1.0);
    }

    #[test]
    fn submatrix_follows_requested_order() {
        let s = store(&[("a", &[1.0, 0.0]), ("b", &[0.6, 0.8])]);
        let sim =
            cosine_similarity_submatrix(&s, &terms(&["b", "a"]), Execution::Sequential).unwrap();
        assert_eq!(sim.terms(), &terms(&["b", "a"]));
        assert!((sim.get(0, 1) - 0.6).abs() < 1e-7);
    }

    #[test]
    fn missing_terms_are_listed() {
        let s = store(&[("a", &[1.0, 0.0])]);
        match cosine_similarity_submatrix(&s, &terms(&["a", "x", "y"]), Execution::Sequential) {
            Err(ShieldError::MissingEmbedding { terms }) => assert_eq!(terms, vec!["x", "y"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn threshold_boundaries() {
        let t = terms(&["a", "b", "c"]);
        let values = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.5, 0.4, 1.0, 0.7, 0.5, 0.7, 1.0]);
        let s = SimilarityMatrix::new(t, values).unwrap();
        let th = s.threshold(0.5);
        assert_eq!(th.get(0, 1), 0.0);
        assert_eq!(th.get(0, 2), 0.5);
        assert_eq!(th.get(1, 2), 0.7);
        assert_eq!(th.get(1, 1), 1.0);
        assert_eq!(s.threshold(0.0), s);
    }

    fn arb_store() -> impl Strategy<Value = (EmbeddingStore, Vec<String>)> {
        (2usize..6, 2usize..10).prop_flat_map(|(d, n)| {
            prop::collection::vec(prop::collection::vec(-1.0f32..1.0, d), n).prop_filter_map(
                "non-zero vectors",
                |vs| {
                    if vs.iter().any(|v| v.iter().all(|x| x.abs() < 1e-3)) {
                        return None;
                    }
                    let entries: Vec<_> = vs
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| (format!("t{i}"), v))
                        .collect();
                    let names = entries.iter().map(|(t, _)| t.clone()).collect();
                    Some((EmbeddingStore::from_vectors(entries).unwrap(), names))
                },
            )
        })
    }

    proptest! {
        #[test]
        fn similarity_is_symmetric_and_bounded((s, names) in arb_store()) {
            let sim = cosine_similarity_submatrix(&s, &names, Execution::Parallel).unwrap();
            let m = names.len();
            for i in 0..m {
                prop_assert_eq!(sim.get(i, i), 1.0);
                for j in 0..m {
                    prop_assert_eq!(sim.get(i, j), sim.get(j, i));
                    prop_assert!(sim.get(i, j) >= -1.0 && sim.get(i, j) <= 1.0 + 1e-12);
                }
            }
        }

        #[test]
        fn threshold_is_monotone((s, names) in arb_store(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let sim = cosine_similarity_submatrix(&s, &names, Execution::Sequential).unwrap();
            let (s_lo, s_hi) = (sim.threshold(lo), sim.threshold(hi));
            let m = names.len();
            for i in 0..m {
                for j in 0..m {
                    if s_hi.get(i, j) != 0.0 {
                        prop_assert!(s_lo.get(i, j) != 0.0);
                    }
                    if i != j && s_hi.get(i, j) != 0.0 {
                        prop_assert!(s_hi.get(i, j) >= hi);
                    }
                }
            }
        }
    }
}
