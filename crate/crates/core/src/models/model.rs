use std::ops::Range;

use rand::{Rng, SeedableRng};

use super::config::{HeadKind, ModelConfig, ModelKind};
use super::layers::{AttentionPool, BiLstmLayer, Linear};
use crate::autodiff::{xavier_init, ParamId, ParamStore, Tape, Tensor, Var, XavierVariant};
use crate::error::{Error, Result};
use crate::text::PAD;

/// Sentences of token ids. PAD tokens and all-PAD sentences are masked.
pub type DocTokens = [Vec<u32>];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Encoder {
    Awe,
    SentAvg {
        sentence_rnn: BiLstmLayer,
    },
    Han {
        word_rnn: BiLstmLayer,
        word_attention: AttentionPool,
        sentence_rnn: BiLstmLayer,
        sentence_attention: AttentionPool,
    },
}

/// A document encoder plus its task head, owning all parameters.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    params: ParamStore,
    embedding: ParamId,
    encoder: Encoder,
    head: Linear,
}

/// Attention weights for one document, for inspection.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AttentionMap {
    /// Per real sentence, weights over its tokens (masked tokens are 0).
    pub words: Vec<Vec<f64>>,
    /// Weights over real sentences.
    pub sentences: Vec<f64>,
}

pub struct ForwardOutput {
    /// `[batch × outputs]` head output.
    pub output: Var,
    /// `[batch × doc_dim]` document vectors (before dropout).
    pub doc_vectors: Var,
    /// Present for HAN only.
    pub attention: Option<Vec<AttentionMap>>,
}

/// Row layout of the real (non-empty) sentences of a batch.
struct SentenceLayout {
    /// `(doc, sentence)` for each real sentence row.
    rows: Vec<(usize, usize)>,
    /// Per document, row indices of its real sentences in order.
    per_doc: Vec<Vec<usize>>,
}

impl SentenceLayout {
    fn new(docs: &[&DocTokens]) -> Result<Self> {
        let mut rows = Vec::new();
        let mut per_doc = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let mut mine = Vec::new();
            for (s, sent) in doc.iter().enumerate() {
                if sent.iter().any(|&t| t != PAD) {
                    mine.push(rows.len());
                    rows.push((d, s));
                }
            }
            if mine.is_empty() {
                return Err(Error::Degenerate(format!("document {d} in batch has no tokens")));
            }
            per_doc.push(mine);
        }
        Ok(Self { rows, per_doc })
    }

    fn max_sentences(&self) -> usize {
        self.per_doc.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Step-major selection indices and masks for the sentence-level pass.
    fn sentence_steps(&self) -> (Vec<Vec<Option<usize>>>, Vec<Vec<bool>>) {
        let steps = self.max_sentences();
        let index: Vec<Vec<Option<usize>>> = (0..steps)
            .map(|k| self.per_doc.iter().map(|rows| rows.get(k).copied()).collect())
            .collect();
        let masks = index
            .iter()
            .map(|col| col.iter().map(Option::is_some).collect())
            .collect();
        (index, masks)
    }
}

impl Model {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let embedding = xavier_init(
            &[config.vocab_size, config.embedding_dim],
            XavierVariant::Uniform,
            rng,
        );
        Self::with_embeddings(config, embedding, rng)
    }

    /// Builds a model around a prepared `[vocab × dim]` embedding matrix.
    /// The PAD row is zeroed.
    pub fn with_embeddings<R: Rng + ?Sized>(config: ModelConfig, mut embedding: Tensor, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let expected = [config.vocab_size, config.embedding_dim];
        if embedding.shape() != expected {
            return Err(Error::shape("embedding", embedding.shape(), &expected));
        }
        let dim = config.embedding_dim;
        embedding.data_mut()[PAD as usize * dim..(PAD as usize + 1) * dim].fill(0.0);

        let mut params = ParamStore::new();
        let emb = params.add("embedding", embedding);
        params.get_mut(emb).trainable = !config.freeze_embeddings;

        let h = config.hidden;
        let encoder = match config.kind {
            ModelKind::Awe => Encoder::Awe,
            ModelKind::SentAvgBilstm => Encoder::SentAvg {
                sentence_rnn: BiLstmLayer::new(&mut params, "sentence_rnn", dim, h, rng),
            },
            ModelKind::Han => Encoder::Han {
                word_rnn: BiLstmLayer::new(&mut params, "word_rnn", dim, h, rng),
                word_attention: AttentionPool::new(&mut params, "word_attention", 2 * h, rng),
                sentence_rnn: BiLstmLayer::new(&mut params, "sentence_rnn", 2 * h, h, rng),
                sentence_attention: AttentionPool::new(&mut params, "sentence_attention", 2 * h, rng),
            },
        };
        let head = Linear::new(&mut params, "head", config.doc_dim(), config.head.outputs(), rng);
        Ok(Self {
            config,
            params,
            embedding: emb,
            encoder,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn embedding_id(&self) -> ParamId {
        self.embedding
    }

    /// Total scalar count over every parameter, embeddings included.
    pub fn count_parameters(&self) -> usize {
        self.params.iter().map(|(_, p)| p.tensor.numel()).sum()
    }

    fn check_tokens(&self, docs: &[&DocTokens]) -> Result<()> {
        let v = self.config.vocab_size as u32;
        for doc in docs {
            if let Some(bad) = doc.iter().flatten().find(|&&t| t >= v) {
                return Err(Error::InvalidArgument(format!(
                    "token id {bad} outside vocabulary of {v}"
                )));
            }
        }
        Ok(())
    }

    /// Encodes a batch and applies the head. Dropout on the document vector
    /// is active only when `training`.
    pub fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        docs: &[&DocTokens],
        training: bool,
        rng: &mut R,
    ) -> Result<ForwardOutput> {
        if docs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        self.check_tokens(docs)?;
        let (doc_vectors, attention) = match &self.encoder {
            Encoder::Awe => (self.encode_awe(tape, docs)?, None),
            Encoder::SentAvg { sentence_rnn } => (self.encode_sent_avg(tape, docs, sentence_rnn)?, None),
            Encoder::Han {
                word_rnn,
                word_attention,
                sentence_rnn,
                sentence_attention,
            } => {
                let (v, maps) = self.encode_han(tape, docs, word_rnn, word_attention, sentence_rnn, sentence_attention)?;
                (v, Some(maps))
            }
        };
        let dropped = tape.dropout(doc_vectors, self.config.dropout, training, rng)?;
        let output = self.head.forward(tape, dropped)?;
        Ok(ForwardOutput {
            output,
            doc_vectors,
            attention,
        })
    }

    fn encode_awe(&self, tape: &mut Tape, docs: &[&DocTokens]) -> Result<Var> {
        let emb = tape.param(self.embedding);
        let mut ids = Vec::new();
        let mut segments: Vec<Range<usize>> = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let start = ids.len();
            ids.extend(doc.iter().flatten().filter(|&&t| t != PAD).map(|&t| Some(t as usize)));
            if ids.len() == start {
                return Err(Error::Degenerate(format!("document {d} in batch has no tokens")));
            }
            segments.push(start..ids.len());
        }
        let rows = tape.select_rows(emb, &ids)?;
        tape.segment_mean(rows, &segments)
    }

    fn sentence_means(&self, tape: &mut Tape, docs: &[&DocTokens], layout: &SentenceLayout) -> Result<Var> {
        let emb = tape.param(self.embedding);
        let mut ids = Vec::new();
        let mut segments = Vec::with_capacity(layout.rows.len());
        for &(d, s) in &layout.rows {
            let start = ids.len();
            ids.extend(docs[d][s].iter().filter(|&&t| t != PAD).map(|&t| Some(t as usize)));
            segments.push(start..ids.len());
        }
        let rows = tape.select_rows(emb, &ids)?;
        tape.segment_mean(rows, &segments)
    }

    fn encode_sent_avg(&self, tape: &mut Tape, docs: &[&DocTokens], rnn: &BiLstmLayer) -> Result<Var> {
        let layout = SentenceLayout::new(docs)?;
        let sentence_vectors = self.sentence_means(tape, docs, &layout)?;
        let (index, masks) = layout.sentence_steps();
        let inputs = index
            .iter()
            .map(|col| tape.select_rows(sentence_vectors, col))
            .collect::<Result<Vec<_>>>()?;
        let states = rnn.run(tape, &inputs, &masks)?;
        let last_forward = *states.forward.last().expect("non-empty");
        let first_backward = states.backward[0];
        tape.concat_cols(&[last_forward, first_backward])
    }

    fn encode_han(
        &self,
        tape: &mut Tape,
        docs: &[&DocTokens],
        word_rnn: &BiLstmLayer,
        word_attention: &AttentionPool,
        sentence_rnn: &BiLstmLayer,
        sentence_attention: &AttentionPool,
    ) -> Result<(Var, Vec<AttentionMap>)> {
        let layout = SentenceLayout::new(docs)?;
        let emb = tape.param(self.embedding);
        let sentence = |&(d, s): &(usize, usize)| &docs[d][s];
        let max_len = layout.rows.iter().map(|r| sentence(r).len()).max().unwrap_or(0);

        let mut word_inputs = Vec::with_capacity(max_len);
        let mut word_masks = Vec::with_capacity(max_len);
        for t in 0..max_len {
            let ids: Vec<Option<usize>> = layout
                .rows
                .iter()
                .map(|r| sentence(r).get(t).filter(|&&id| id != PAD).map(|&id| id as usize))
                .collect();
            word_masks.push(ids.iter().map(Option::is_some).collect::<Vec<bool>>());
            word_inputs.push(tape.select_rows(emb, &ids)?);
        }
        let word_states = word_rnn.outputs(tape, &word_inputs, &word_masks)?;
        let (sentence_vectors, word_alpha) = word_attention.pool(tape, &word_states, &word_masks)?;

        let (index, masks) = layout.sentence_steps();
        let inputs = index
            .iter()
            .map(|col| tape.select_rows(sentence_vectors, col))
            .collect::<Result<Vec<_>>>()?;
        let sentence_states = sentence_rnn.outputs(tape, &inputs, &masks)?;
        let (doc_vectors, sentence_alpha) = sentence_attention.pool(tape, &sentence_states, &masks)?;

        let wa = tape.value(word_alpha);
        let sa = tape.value(sentence_alpha);
        let maps = layout
            .per_doc
            .iter()
            .enumerate()
            .map(|(d, rows)| AttentionMap {
                words: rows
                    .iter()
                    .map(|&r| wa.row(r)[..sentence(&layout.rows[r]).len()].to_vec())
                    .collect(),
                sentences: sa.row(d)[..rows.len()].to_vec(),
            })
            .collect();
        Ok((doc_vectors, maps))
    }

    /// Task loss for a batch: cross-entropy for classification (targets are
    /// class indices as floats), MAE for regression.
    pub fn loss(&self, tape: &mut Tape, output: Var, targets: &[f64]) -> Result<Var> {
        match self.config.head {
            HeadKind::Classify => {
                let classes: Vec<usize> = targets.iter().map(|&t| t as usize).collect();
                tape.cross_entropy(output, &classes)
            }
            HeadKind::Regress => tape.abs_error(output, targets),
        }
    }
}

/// Inference result for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Raw head output: two logits or one citation-score.
    pub output: Vec<f64>,
    pub attention: Option<AttentionMap>,
}

impl Prediction {
    /// Probability of class 1 (accepted) under the softmax of the logits.
    pub fn positive_probability(&self) -> Option<f64> {
        match self.output.as_slice() {
            [neg, pos] => Some(crate::autodiff::sigmoid(pos - neg)),
            _ => None,
        }
    }

    pub fn predicted_class(&self) -> Option<u8> {
        match self.output.as_slice() {
            [neg, pos] => Some(u8::from(pos > neg)),
            _ => None,
        }
    }

    pub fn score(&self) -> Option<f64> {
        match self.output.as_slice() {
            [s] => Some(*s),
            _ => None,
        }
    }
}

impl Model {
    /// Eval-mode predictions in batches of `batch_size`.
    pub fn predict(&self, docs: &[&DocTokens], batch_size: usize) -> Result<Vec<Prediction>> {
        // eval mode never draws from the rng
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(batch_size.max(1)) {
            let mut tape = Tape::new(&self.params);
            let fwd = self.forward(&mut tape, chunk, false, &mut rng)?;
            let values = tape.value(fwd.output);
            let mut maps = fwd.attention.map(Vec::into_iter);
            for r in 0..chunk.len() {
                out.push(Prediction {
                    output: values.row(r).to_vec(),
                    attention: maps.as_mut().and_then(Iterator::next),
                });
            }
        }
        Ok(out)
    }

    /// Document vectors in eval mode, one row per document.
    pub fn encode(&self, docs: &[&DocTokens]) -> Result<Vec<Vec<f64>>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut tape = Tape::new(&self.params);
        let fwd = self.forward(&mut tape, docs, false, &mut rng)?;
        let v = tape.value(fwd.doc_vectors);
        Ok((0..docs.len()).map(|r| v.row(r).to_vec()).collect())
    }
}
