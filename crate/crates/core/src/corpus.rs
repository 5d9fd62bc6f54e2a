//! SemEval-2014 task 4 corpus ingestion.
//!
//! One labeled instance per (sentence, aspect term) pair. Aspect terms come
//! with character offsets into the raw sentence, which we map onto token
//! spans after tokenization. Instances labeled "conflict" are dropped and
//! counted.

use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

/// Sentiment polarity. Index order is fixed (Positive=0, Negative=1,
/// Neutral=2) so that tie-breaking and checkpoints stay deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn index(self) -> usize {
        match self {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
            Polarity::Neutral => 2,
        }
    }

    pub fn from_index(i: usize) -> Polarity {
        Polarity::ALL[i]
    }

    pub fn name(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A token with its character offsets into the raw sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// A tokenized sentence with one aspect span and its gold polarity.
#[derive(Debug, Clone)]
pub struct Instance {
    pub tokens: Vec<Token>,
    /// Contiguous token index range of the aspect, non-empty.
    pub aspect_span: Range<usize>,
    pub label: Polarity,
    pub raw_text: String,
}

impl Instance {
    /// Sentence length n, counting aspect tokens.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token indices outside the aspect span, in sentence order.
    pub fn context_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tokens.len()).filter(move |i| !self.aspect_span.contains(i))
    }

    pub fn context_len(&self) -> usize {
        self.tokens.len() - self.aspect_span.len()
    }

    pub fn aspect_text(&self) -> String {
        self.tokens[self.aspect_span.clone()]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Per-polarity instance counts for one split, plus dropped conflicts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetStats {
    pub counts: [usize; 3],
    pub conflict_dropped: usize,
}

impl DatasetStats {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, p: Polarity) -> usize {
        self.counts[p.index()]
    }
}

/// Lowercase, split on whitespace, and isolate punctuation characters as
/// their own tokens. Offsets are character (not byte) positions so they
/// line up with the aspect-term from/to attributes.
pub fn tokenize(raw: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut word_start = 0usize;

    let flush = |tokens: &mut Vec<Token>, word: &mut String, start: usize, end: usize| {
        if !word.is_empty() {
            tokens.push(Token {
                text: std::mem::take(word),
                char_start: start,
                char_end: end,
            });
        }
    };

    for (pos, ch) in raw.chars().enumerate() {
        if ch.is_whitespace() {
            flush(&mut tokens, &mut word, word_start, pos);
        } else if ch.is_alphanumeric() {
            if word.is_empty() {
                word_start = pos;
            }
            word.extend(ch.to_lowercase());
        } else {
            // punctuation becomes a single-character token
            flush(&mut tokens, &mut word, word_start, pos);
            tokens.push(Token {
                text: ch.to_string(),
                char_start: pos,
                char_end: pos + 1,
            });
        }
    }
    let total = raw.chars().count();
    flush(&mut tokens, &mut word, word_start, total);

    if tokens.is_empty() {
        return Err(Error::EmptySentence);
    }
    Ok(tokens)
}

/// Parse a SemEval-2014 task 4 XML file into instances and split statistics.
pub fn parse_semeval_xml(path: &Path) -> Result<(Vec<Instance>, DatasetStats)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_semeval_str(&text).map_err(|e| match e {
        Error::XmlParse { line, message, .. } => Error::XmlParse {
            path: path.to_path_buf(),
            line,
            message,
        },
        other => other,
    })
}

/// Parse SemEval XML from a string. Exposed for tests and in-memory corpora.
pub fn parse_semeval_str(xml: &str) -> Result<(Vec<Instance>, DatasetStats)> {
    let doc = roxmltree::Document::parse(xml).map_err(|e| Error::XmlParse {
        path: "<string>".into(),
        line: e.pos().row as usize,
        message: e.to_string(),
    })?;

    let mut instances = Vec::new();
    let mut stats = DatasetStats::default();

    for sentence in doc
        .root_element()
        .descendants()
        .filter(|n| n.has_tag_name("sentence"))
    {
        let sentence_id = sentence.attribute("id").unwrap_or("?").to_string();
        let raw = sentence
            .children()
            .find(|n| n.has_tag_name("text"))
            .and_then(|n| n.text())
            .unwrap_or("");

        let terms: Vec<_> = sentence
            .descendants()
            .filter(|n| n.has_tag_name("aspectTerm"))
            .collect();
        if terms.is_empty() {
            continue;
        }

        let tokens = tokenize(raw)?;

        for term in terms {
            let polarity = term.attribute("polarity").unwrap_or("");
            if polarity == "conflict" {
                stats.conflict_dropped += 1;
                continue;
            }
            let label = match polarity {
                "positive" => Polarity::Positive,
                "negative" => Polarity::Negative,
                "neutral" => Polarity::Neutral,
                other => {
                    return Err(Error::XmlParse {
                        path: "<string>".into(),
                        line: 0,
                        message: format!(
                            "sentence {sentence_id}: unknown polarity {other:?}"
                        ),
                    })
                }
            };
            let term_text = term.attribute("term").unwrap_or("").to_string();
            let from = parse_offset(term.attribute("from"), &sentence_id)?;
            let to = parse_offset(term.attribute("to"), &sentence_id)?;

            let span = aspect_token_span(&tokens, from, to).ok_or_else(|| {
                Error::AspectAlignment {
                    sentence_id: sentence_id.clone(),
                    term: term_text.clone(),
                    from,
                    to,
                }
            })?;

            stats.counts[label.index()] += 1;
            instances.push(Instance {
                tokens: tokens.clone(),
                aspect_span: span,
                label,
                raw_text: raw.to_string(),
            });
        }
    }

    Ok((instances, stats))
}

fn parse_offset(attr: Option<&str>, sentence_id: &str) -> Result<usize> {
    attr.and_then(|s| s.parse().ok()).ok_or_else(|| Error::XmlParse {
        path: "<string>".into(),
        line: 0,
        message: format!("sentence {sentence_id}: missing or invalid from/to offset"),
    })
}

/// Map the aspect term's character range onto the tokens that overlap it.
/// Tokens are ordered and non-overlapping, so the result is contiguous.
fn aspect_token_span(tokens: &[Token], from: usize, to: usize) -> Option<Range<usize>> {
    if from >= to {
        return None;
    }
    let mut first = None;
    let mut last = None;
    for (i, t) in tokens.iter().enumerate() {
        if t.char_start < to && t.char_end > from {
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    match (first, last) {
        (Some(a), Some(b)) => Some(a..b + 1),
        _ => None,
    }
}

/// Absolute token distance from a context word to the nearest aspect token.
/// The context index must lie outside the aspect span.
pub fn location_of(instance: &Instance, context_index: usize) -> usize {
    assert!(
        !instance.aspect_span.contains(&context_index),
        "location_of called on an aspect token"
    );
    instance
        .aspect_span
        .clone()
        .map(|a| context_index.abs_diff(a))
        .min()
        .expect("aspect span is non-empty")
}

/// Count labels over a set of instances.
pub fn label_counts(instances: &[Instance]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for inst in instances {
        counts[inst.label.index()] += 1;
    }
    counts
}

/// Distinct lowercased token texts, for filtering embedding loads.
pub fn vocabulary(instances: &[Instance]) -> std::collections::HashSet<String> {
    let mut vocab = std::collections::HashSet::new();
    for inst in instances {
        for tok in &inst.tokens {
            vocab.insert(tok.text.clone());
        }
    }
    vocab
}

/// Group instance counts by split name for the stats report.
pub fn stats_table(splits: &[(String, DatasetStats)]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "Split", "Pos.", "Neg.", "Neu.", "Total", "Conflict"
    ));
    for (name, stats) in splits {
        out.push_str(&format!(
            "{:<20} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            name,
            stats.counts[0],
            stats.counts[1],
            stats.counts[2],
            stats.total(),
            stats.conflict_dropped
        ));
    }
    out
}

/// Stable FNV-1a hash, used to derive per-word RNG seeds.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn tokenize_example_sentence() {
        let toks = tokenize("great food but the service was dreadful!").unwrap();
        assert_eq!(
            texts(&toks),
            vec!["great", "food", "but", "the", "service", "was", "dreadful", "!"]
        );
    }

    #[test]
    fn tokenize_lowercases() {
        let toks = tokenize("Hello").unwrap();
        assert_eq!(texts(&toks), vec!["hello"]);
        assert_eq!(toks[0].char_start, 0);
        assert_eq!(toks[0].char_end, 5);
    }

    #[test]
    fn tokenize_splits_punctuation() {
        let toks = tokenize("a,b").unwrap();
        assert_eq!(texts(&toks), vec!["a", ",", "b"]);
        assert_eq!(toks[1].char_start, 1);
        assert_eq!(toks[2].char_start, 2);
    }

    #[test]
    fn tokenize_whitespace_only_errors() {
        assert!(matches!(tokenize("   \t "), Err(Error::EmptySentence)));
    }

    #[test]
    fn tokenize_offsets_map_back() {
        let raw = "The  fish-cakes were fine.";
        let toks = tokenize(raw).unwrap();
        let chars: Vec<char> = raw.chars().collect();
        for t in &toks {
            let substr: String = chars[t.char_start..t.char_end].iter().collect();
            assert_eq!(substr.to_lowercase(), t.text);
        }
    }

    const TOY_XML: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="s1">
    <text>great food but the service was dreadful!</text>
    <aspectTerms>
      <aspectTerm term="food" polarity="positive" from="6" to="10"/>
      <aspectTerm term="service" polarity="negative" from="19" to="26"/>
    </aspectTerms>
  </sentence>
  <sentence id="s2">
    <text>the battery life is long</text>
    <aspectTerms>
      <aspectTerm term="battery life" polarity="positive" from="4" to="16"/>
    </aspectTerms>
  </sentence>
</sentences>"#;

    #[test]
    fn parse_maps_offsets_to_token_spans() {
        let (instances, stats) = parse_semeval_str(TOY_XML).unwrap();
        assert_eq!(instances.len(), 3);
        assert_eq!(stats.counts, [2, 1, 0]);
        assert_eq!(stats.conflict_dropped, 0);

        let food = &instances[0];
        assert_eq!(food.aspect_span, 1..2);
        assert_eq!(food.label, Polarity::Positive);

        let service = &instances[1];
        assert_eq!(service.aspect_span, 4..5);
        assert_eq!(service.label, Polarity::Negative);

        let battery = &instances[2];
        assert_eq!(battery.aspect_span, 1..3);
        assert_eq!(battery.aspect_text(), "battery life");
    }

    #[test]
    fn parse_drops_and_counts_conflict() {
        let xml = r#"<sentences><sentence id="c1">
            <text>good but slow</text>
            <aspectTerms><aspectTerm term="good" polarity="conflict" from="0" to="4"/></aspectTerms>
        </sentence></sentences>"#;
        let (instances, stats) = parse_semeval_str(xml).unwrap();
        assert!(instances.is_empty());
        assert_eq!(stats.conflict_dropped, 1);
        assert_eq!(stats.total(), 0);
    }

    #[test]
    fn parse_detects_misaligned_offsets() {
        let xml = r#"<sentences><sentence id="bad">
            <text>short text</text>
            <aspectTerms><aspectTerm term="x" polarity="positive" from="50" to="55"/></aspectTerms>
        </sentence></sentences>"#;
        let err = parse_semeval_str(xml).unwrap_err();
        assert!(matches!(err, Error::AspectAlignment { .. }));
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn parse_rejects_malformed_xml() {
        let err = parse_semeval_str("<sentences><sentence></sentences>").unwrap_err();
        match err {
            Error::XmlParse { line, .. } => assert!(line >= 1),
            other => panic!("expected XmlParse, got {other:?}"),
        }
    }

    #[test]
    fn aspect_tokens_cover_term_range() {
        let (instances, _) = parse_semeval_str(TOY_XML).unwrap();
        // "battery life" spans chars 4..16 in s2
        let inst = &instances[2];
        let first = &inst.tokens[inst.aspect_span.start];
        let last = &inst.tokens[inst.aspect_span.end - 1];
        assert!(first.char_start <= 4);
        assert!(last.char_end >= 16);
    }

    #[test]
    fn location_of_example_sentence() {
        let (instances, _) = parse_semeval_str(TOY_XML).unwrap();
        let service = &instances[1];
        // dreadful is token 6, service token 4
        assert_eq!(service.tokens[6].text, "dreadful");
        assert_eq!(location_of(service, 6), 2);
        // adjacent token
        assert_eq!(location_of(service, 3), 1);
        assert_eq!(location_of(service, 5), 1);
    }

    #[test]
    fn location_of_multiword_uses_nearest_aspect_token() {
        let (instances, _) = parse_semeval_str(TOY_XML).unwrap();
        let battery = &instances[2];
        assert_eq!(battery.aspect_span, 1..3);
        // tokens are [the, battery, life, is, long]; token 4 is two steps
        // from the nearest aspect token (index 2)
        assert_eq!(location_of(battery, 4), 2);
        assert_eq!(location_of(battery, 0), 1);
    }

    #[test]
    #[should_panic(expected = "aspect token")]
    fn location_of_inside_span_panics() {
        let (instances, _) = parse_semeval_str(TOY_XML).unwrap();
        location_of(&instances[0], 1);
    }
}
