//! Versioned episode files.
//!
//! Two variants share one logical document (per-class shot matrices plus a
//! query matrix):
//!
//! * **Text** — a JSON object `{version, d, r, n, k, shots, query}` where
//!   `shots[c][k]` and `query` are `d` rows of `r` values. Hand-editable;
//!   numbers round-trip at full f64 precision.
//! * **Binary** — a fixed header (magic `MCLE`, format version `u16`, then
//!   `d`, `r`, `n`, `k` as little-endian `u32`) followed by the shot
//!   matrices class by class and the query matrix, each stored row-major as
//!   little-endian `f32`. Compact and bit-exact at f32 precision.
//!
//! Loading an episode applies prototype averaging, so a K-shot file yields
//! an N-way episode directly.

use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::episode::{build_episode, Episode, FeatureMatrix};
use crate::error::{Error, Result};

/// Magic bytes opening every binary episode file.
pub const MAGIC: [u8; 4] = *b"MCLE";
/// Current file format version, shared by both variants.
pub const FORMAT_VERSION: u16 = 1;

/// On-disk representation to use when saving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeFormat {
    Text,
    Binary,
}

/// The logical content of an episode file: raw shots, not yet averaged.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeDocument {
    pub per_class_shots: Vec<Vec<FeatureMatrix>>,
    pub query: FeatureMatrix,
}

impl EpisodeDocument {
    /// Wraps an already-averaged episode as a 1-shot document.
    pub fn from_episode(episode: &Episode) -> Self {
        Self {
            per_class_shots: episode
                .supports()
                .iter()
                .map(|s| vec![s.clone()])
                .collect(),
            query: episode.query().clone(),
        }
    }

    /// Averages shots into prototypes and builds the episode.
    pub fn to_episode(&self) -> Result<Episode> {
        build_episode(&self.per_class_shots, self.query.clone())
    }

    fn dims(&self) -> Result<(usize, usize, usize, usize)> {
        let n = self.per_class_shots.len();
        if n == 0 {
            return Err(Error::EmptyInput("document has no classes".into()));
        }
        let k = self.per_class_shots[0].len();
        if k == 0 {
            return Err(Error::EmptyInput("class 0 has no shots".into()));
        }
        let (d, r) = (self.query.d(), self.query.r());
        for (c, shots) in self.per_class_shots.iter().enumerate() {
            if shots.len() != k {
                return Err(Error::Dimension(format!(
                    "class {c} has {} shots, class 0 has {k}",
                    shots.len()
                )));
            }
            for shot in shots {
                if shot.d() != d || shot.r() != r {
                    return Err(Error::Dimension(format!(
                        "class {c} shot is {}x{}, query is {d}x{r}",
                        shot.d(),
                        shot.r()
                    )));
                }
            }
        }
        Ok((d, r, n, k))
    }
}

#[derive(Serialize, Deserialize)]
struct TextDocument {
    version: u16,
    d: usize,
    r: usize,
    n: usize,
    k: usize,
    shots: Vec<Vec<Vec<Vec<f64>>>>,
    query: Vec<Vec<f64>>,
}

fn matrix_to_rows(m: &FeatureMatrix) -> Vec<Vec<f64>> {
    m.data().rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], d: usize, r: usize, what: &str) -> Result<FeatureMatrix> {
    if rows.len() != d || rows.iter().any(|row| row.len() != r) {
        return Err(Error::Format(format!(
            "{what}: expected {d} rows of {r} values"
        )));
    }
    let mut data = ndarray::Array2::zeros((d, r));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            data[[i, j]] = v;
        }
    }
    FeatureMatrix::new(data)
}

fn io_err(path: &Path, err: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        err.kind(),
        format!("{}: {err}", path.display()),
    ))
}

/// Serializes a document in the chosen format.
pub fn save_document(doc: &EpisodeDocument, path: &Path, format: EpisodeFormat) -> Result<()> {
    let (d, r, n, k) = doc.dims()?;
    let bytes = match format {
        EpisodeFormat::Text => {
            let text = TextDocument {
                version: FORMAT_VERSION,
                d,
                r,
                n,
                k,
                shots: doc
                    .per_class_shots
                    .iter()
                    .map(|shots| shots.iter().map(matrix_to_rows).collect())
                    .collect(),
                query: matrix_to_rows(&doc.query),
            };
            let mut s = serde_json::to_string_pretty(&text)
                .map_err(|e| Error::Format(format!("serialize: {e}")))?;
            s.push('\n');
            s.into_bytes()
        }
        EpisodeFormat::Binary => {
            let mut out = Vec::with_capacity(22 + (n * k + 1) * d * r * 4);
            out.extend_from_slice(&MAGIC);
            out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
            for dim in [d, r, n, k] {
                let v = u32::try_from(dim)
                    .map_err(|_| Error::Format(format!("dimension {dim} exceeds u32")))?;
                out.extend_from_slice(&v.to_le_bytes());
            }
            let mut push_matrix = |m: &FeatureMatrix| {
                for row in m.data().rows() {
                    for &v in row {
                        out.extend_from_slice(&(v as f32).to_le_bytes());
                    }
                }
            };
            for shots in &doc.per_class_shots {
                for shot in shots {
                    push_matrix(shot);
                }
            }
            push_matrix(&doc.query);
            out
        }
    };
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Reads either variant, sniffing the binary magic first.
pub fn load_document(path: &Path) -> Result<EpisodeDocument> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(&MAGIC) {
        load_binary(&bytes)
    } else {
        load_text(&bytes)
    }
}

fn load_text(bytes: &[u8]) -> Result<EpisodeDocument> {
    let text: TextDocument = serde_json::from_slice(bytes)
        .map_err(|e| Error::Format(format!("episode json: {e}")))?;
    if text.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported episode format version {} (this build reads version {FORMAT_VERSION})",
            text.version
        )));
    }
    if text.shots.len() != text.n {
        return Err(Error::Format(format!(
            "header declares {} classes but file has {}",
            text.n,
            text.shots.len()
        )));
    }
    let mut per_class_shots = Vec::with_capacity(text.n);
    for (c, shots) in text.shots.iter().enumerate() {
        if shots.len() != text.k {
            return Err(Error::Format(format!(
                "class {c}: header declares {} shots but file has {}",
                text.k,
                shots.len()
            )));
        }
        let mut class = Vec::with_capacity(text.k);
        for rows in shots {
            class.push(matrix_from_rows(rows, text.d, text.r, &format!("class {c} shot"))?);
        }
        per_class_shots.push(class);
    }
    let query = matrix_from_rows(&text.query, text.d, text.r, "query")?;
    Ok(EpisodeDocument { per_class_shots, query })
}

fn load_binary(bytes: &[u8]) -> Result<EpisodeDocument> {
    let mut cursor = std::io::Cursor::new(bytes);
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("file shorter than its magic".into()))?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let version = read_u16(&mut cursor)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported episode format version {version} (this build reads version {FORMAT_VERSION})"
        )));
    }
    let d = read_u32(&mut cursor)? as usize;
    let r = read_u32(&mut cursor)? as usize;
    let n = read_u32(&mut cursor)? as usize;
    let k = read_u32(&mut cursor)? as usize;
    if d == 0 || r == 0 || n == 0 || k == 0 {
        return Err(Error::Format(format!(
            "header dimensions must be positive, got d={d} r={r} n={n} k={k}"
        )));
    }
    let expected = 22 + (n * k + 1) * d * r * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "file is {} bytes, header implies {expected}",
            bytes.len()
        )));
    }

    let read_matrix = |cursor: &mut std::io::Cursor<&[u8]>, what: &str| -> Result<FeatureMatrix> {
        let mut data = ndarray::Array2::zeros((d, r));
        for i in 0..d {
            for j in 0..r {
                let mut buf = [0u8; 4];
                cursor.read_exact(&mut buf).map_err(|_| {
                    Error::Format(format!(
                        "{what}: unexpected end of file at byte {}",
                        cursor.position()
                    ))
                })?;
                data[[i, j]] = f32::from_le_bytes(buf) as f64;
            }
        }
        FeatureMatrix::new(data)
    };

    let mut per_class_shots = Vec::with_capacity(n);
    for c in 0..n {
        let mut class = Vec::with_capacity(k);
        for _ in 0..k {
            class.push(read_matrix(&mut cursor, &format!("class {c} shot"))?);
        }
        per_class_shots.push(class);
    }
    let query = read_matrix(&mut cursor, "query")?;
    Ok(EpisodeDocument { per_class_shots, query })
}

fn read_u16(cursor: &mut std::io::Cursor<&[u8]>) -> Result<u16> {
    let mut buf = [0u8; 2];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u16::from_le_bytes(buf))
}

fn read_u32(cursor: &mut std::io::Cursor<&[u8]>) -> Result<u32> {
    let mut buf = [0u8; 4];
    cursor
        .read_exact(&mut buf)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(buf))
}

/// Saves an episode (prototypes, so K=1 on disk).
pub fn save_episode(episode: &Episode, path: &Path, format: EpisodeFormat) -> Result<()> {
    save_document(&EpisodeDocument::from_episode(episode), path, format)
}

/// Loads a file and builds the episode, averaging shots into prototypes.
pub fn load_episode(path: &Path) -> Result<Episode> {
    load_document(path)?.to_episode()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::template_shots;
    use ndarray::array;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("affnet-io-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn minimal_episode_round_trips() {
        let m = FeatureMatrix::new(array![[0.5]]).unwrap();
        let ep = Episode::new(vec![m.clone()], m).unwrap();
        for (format, name) in [
            (EpisodeFormat::Binary, "minimal.mcle"),
            (EpisodeFormat::Text, "minimal.json"),
        ] {
            let path = tmp(name);
            save_episode(&ep, &path, format).unwrap();
            let back = load_episode(&path).unwrap();
            assert_eq!(back, ep);
        }
    }

    #[test]
    fn binary_round_trip_is_bit_exact_at_f32() {
        let (shots, query) = template_shots(2, 3, 4, 5, 0.3, 21);
        // snap to f32 so the on-disk representation is exact
        let snap = |m: &FeatureMatrix| {
            FeatureMatrix::new(m.data().mapv(|v| v as f32 as f64)).unwrap()
        };
        let doc = EpisodeDocument {
            per_class_shots: shots
                .iter()
                .map(|s| s.iter().map(snap).collect())
                .collect(),
            query: snap(&query),
        };
        let path = tmp("roundtrip.mcle");
        save_document(&doc, &path, EpisodeFormat::Binary).unwrap();
        let back = load_document(&path).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let (shots, query) = template_shots(2, 2, 3, 4, 0.3, 22);
        let doc = EpisodeDocument { per_class_shots: shots, query };
        let path = tmp("roundtrip.json");
        save_document(&doc, &path, EpisodeFormat::Text).unwrap();
        let back = load_document(&path).unwrap();
        for (a, b) in back
            .per_class_shots
            .iter()
            .flatten()
            .zip(doc.per_class_shots.iter().flatten())
        {
            for (x, y) in a.data().iter().zip(b.data().iter()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bad_magic_is_rejected() {
        let path = tmp("badmagic.mcle");
        fs::write(&path, b"NOPE\x01\x00rest").unwrap();
        match load_document(&path) {
            // no magic: falls through to the text parser, which also fails
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
        let mut bytes = b"MCLX".to_vec();
        bytes.extend_from_slice(&[0u8; 40]);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_document(&path), Err(Error::Format(_))));
    }

    #[test]
    fn future_version_is_rejected_with_message() {
        let m = FeatureMatrix::new(array![[0.5]]).unwrap();
        let ep = Episode::new(vec![m.clone()], m).unwrap();
        let path = tmp("future.mcle");
        save_episode(&ep, &path, EpisodeFormat::Binary).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 2; // bump version
        fs::write(&path, &bytes).unwrap();
        match load_document(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("version 2"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let (shots, query) = template_shots(1, 1, 2, 2, 0.3, 23);
        let doc = EpisodeDocument { per_class_shots: shots, query };
        let path = tmp("trunc.mcle");
        save_document(&doc, &path, EpisodeFormat::Binary).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        match load_document(&path) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains("bytes") || msg.contains("byte"), "{msg}")
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_dims_name_the_class() {
        let json = r#"{
            "version": 1, "d": 1, "r": 2, "n": 2, "k": 1,
            "shots": [[[[1.0, 2.0]]], [[[1.0]]]],
            "query": [[0.0, 0.0]]
        }"#;
        let path = tmp("mismatch.json");
        fs::write(&path, json).unwrap();
        match load_document(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("class 1"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn text_parse_error_carries_position() {
        let path = tmp("broken.json");
        fs::write(&path, "{\"version\": 1,\n  broken").unwrap();
        match load_document(&path) {
            Err(Error::Format(msg)) => {
                assert!(msg.contains("line") || msg.contains("column"), "{msg}")
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_reports_path() {
        let path = tmp("does-not-exist.mcle");
        let _ = fs::remove_file(&path);
        match load_document(&path) {
            Err(Error::Io(err)) => {
                assert!(err.to_string().contains("does-not-exist"), "{err}")
            }
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn loading_k_shot_file_averages() {
        let a = FeatureMatrix::new(array![[1.0, 3.0]]).unwrap();
        let b = FeatureMatrix::new(array![[3.0, 5.0]]).unwrap();
        let q = FeatureMatrix::new(array![[0.0, 0.0]]).unwrap();
        let doc = EpisodeDocument { per_class_shots: vec![vec![a, b]], query: q };
        let path = tmp("kshot.json");
        save_document(&doc, &path, EpisodeFormat::Text).unwrap();
        let ep = load_episode(&path).unwrap();
        assert_eq!(ep.support(0).data(), &array![[2.0, 4.0]]);
    }
}
