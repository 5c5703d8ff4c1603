//! Raw documents to tagged, tokenized, length-limited id sequences.

mod corpus;
mod cutoff;
mod embeddings;
mod segment;
mod tags;
mod tokenize;
mod vocab;

pub use corpus::{
    build_vocabulary, inject_tags, prepare_corpus, read_corpus, role_sentences, strip_tags, tokenize_document, Label,
    RawDocument, Split, TaggedDocument, TaggedSentence, TokenizedDocument,
};
pub use cutoff::{apply_cutoff, cutoff_len, CutoffPolicy};
pub use embeddings::load_embeddings;
pub use segment::segment_sentences;
pub use tags::{all_tag_tokens, is_tag_token, strip_sentence_tags, wrap_sentence, Role, TagScheme, TagSet};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, DEFAULT_MAX_SIZE, PAD, PAD_TOKEN, UNK, UNK_TOKEN};
