use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use super::vocab::{Vocabulary, PAD};
use crate::autodiff::{xavier_init, Tensor, XavierVariant};
use crate::error::{Error, Result};

/// Reads whitespace-separated text embeddings (`token f1 … f_dim` per line)
/// into a `[vocab × dim]` matrix. Rows missing from the file are
/// Xavier-uniform; the PAD row is zero. A leading `count dim` header line,
/// as written by word2vec tools, is skipped.
pub fn load_embeddings<R: Rng + ?Sized>(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut R,
) -> Result<(Tensor, usize)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut matrix = xavier_init(&[vocab.len(), dim], XavierVariant::Uniform, rng);
    let mut filled = vec![false; vocab.len()];

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values: Vec<&str> = fields.collect();
        if lineno == 0 && values.len() == 1 && token.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
            continue;
        }
        if values.len() != dim {
            return Err(Error::Format {
                line: lineno + 1,
                message: format!("expected {dim} values for `{token}`, found {}", values.len()),
            });
        }
        let id = vocab.encode(token) as usize;
        if !vocab.contains(token) || filled[id] {
            continue;
        }
        let row = &mut matrix.data_mut()[id * dim..(id + 1) * dim];
        for (slot, raw) in row.iter_mut().zip(&values) {
            *slot = raw.parse().map_err(|_| Error::Format {
                line: lineno + 1,
                message: format!("`{raw}` is not a number"),
            })?;
        }
        filled[id] = true;
    }

    let pad = PAD as usize;
    matrix.data_mut()[pad * dim..(pad + 1) * dim].fill(0.0);
    let covered = filled.iter().filter(|&&f| f).count();
    Ok((matrix, covered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn vocab() -> Vocabulary {
        let toks: Vec<String> = ["<PAD>", "<UNK>", "<TITLE>", "cat", "dog"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        Vocabulary::from_tokens(toks).unwrap()
    }

    #[test]
    fn copies_rows_and_initializes_the_rest() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "cat 0.1 0.2 0.3").unwrap();
        writeln!(f, "dog -1 -2 -3").unwrap();
        writeln!(f, "bird 9 9 9").unwrap();
        let v = vocab();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (m, covered) = load_embeddings(f.path(), &v, 3, &mut rng).unwrap();
        assert_eq!(covered, 2);
        assert_eq!(m.shape(), &[5, 3]);
        assert_eq!(m.row(3), &[0.1, 0.2, 0.3]);
        assert_eq!(m.row(4), &[-1.0, -2.0, -3.0]);
        assert_eq!(m.row(0), &[0.0, 0.0, 0.0]);
        let bound = (6.0f64 / (5.0 + 3.0)).sqrt();
        for id in [1, 2] {
            assert!(m.row(id).iter().all(|x| x.abs() <= bound));
            assert!(m.row(id).iter().any(|&x| x != 0.0));
        }
    }

    #[test]
    fn skips_word2vec_header() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "2 2").unwrap();
        writeln!(f, "cat 1 2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (m, _) = load_embeddings(f.path(), &vocab(), 2, &mut rng).unwrap();
        assert_eq!(m.row(3), &[1.0, 2.0]);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "cat 1 2 3").unwrap();
        writeln!(f, "dog 1 2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = load_embeddings(f.path(), &vocab(), 3, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
    }
}
