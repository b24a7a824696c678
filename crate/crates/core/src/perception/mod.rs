//! Utterance to emotion, and (utterance, emotion) to an action sequence.
//!
//! Speech recognition and the language model sit behind [`Transcriber`] and
//! [`Responder`]. The bundled implementations are a keyword table and a
//! fixed rule set, plus an HTTP client for an external chat service.

mod llm;
pub mod stub;

use serde::{Deserialize, Serialize};

pub use llm::{build_prompt, llm_respond, llm_respond_with_token, LlmClientConfig, LlmError, LlmResponder};

use crate::dsl::{compile_sequence, RepairNote, ResolveMode, ResolvedSequence};
use crate::gestures::GestureLibrary;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Joy,
    Sadness,
    Neutral,
    Confusion,
}

impl Emotion {
    pub fn as_str(self) -> &'static str {
        match self {
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Neutral => "neutral",
            Emotion::Confusion => "confusion",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerceptResult {
    pub transcript: String,
    pub emotion: Emotion,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponderOutput {
    /// Exact text produced by the rule set or the model's last reply.
    pub raw_text: String,
    pub sequence: ResolvedSequence,
    pub repairs: Vec<RepairNote>,
}

pub trait Transcriber: Send + Sync {
    fn transcribe(&self, input: &str) -> PerceptResult;
}

pub trait Responder: Send + Sync {
    fn respond(&self, percept: &PerceptResult, library: &GestureLibrary) -> ResponderOutput;
}

/// Keyword-table emotion classifier. The transcript is the input verbatim.
#[derive(Clone, Copy, Debug, Default)]
pub struct MockTranscriber;

impl Transcriber for MockTranscriber {
    fn transcribe(&self, input: &str) -> PerceptResult {
        mock_transcribe(input)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RuleResponder;

impl Responder for RuleResponder {
    fn respond(&self, percept: &PerceptResult, library: &GestureLibrary) -> ResponderOutput {
        rule_respond(percept, library)
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn has_phrase(words: &[String], phrase: &[&str]) -> bool {
    words
        .windows(phrase.len())
        .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b))
}

const JOY_WORDS: &[&str] = &["wonderful", "great", "happy"];
const SADNESS_WORDS: &[&str] = &["tired", "sad", "late"];
const CONFUSION_WORDS: &[&str] = &["guess"];

/// Earlier rows win when several emotions match.
pub fn mock_transcribe(input: &str) -> PerceptResult {
    let w = words(input);
    let any = |table: &[&str]| w.iter().any(|x| table.contains(&x.as_str()));
    let emotion = if any(JOY_WORDS) {
        Some(Emotion::Joy)
    } else if any(SADNESS_WORDS) {
        Some(Emotion::Sadness)
    } else if any(CONFUSION_WORDS) || has_phrase(&w, &["how", "many"]) || input.contains('?') {
        Some(Emotion::Confusion)
    } else {
        None
    };
    PerceptResult {
        transcript: input.to_string(),
        emotion: emotion.unwrap_or(Emotion::Neutral),
        confidence: if emotion.is_some() { 1.0 } else { 0.5 },
    }
}

pub fn is_greeting(transcript: &str) -> bool {
    let w = words(transcript);
    w.iter().any(|x| x == "hi" || x == "hello") || has_phrase(&w, &["how", "are", "you"])
}

/// Sequence text chosen by the rule responder. Greetings take priority
/// over the emotion label.
pub fn rule_sequence_text(percept: &PerceptResult) -> &'static str {
    if is_greeting(&percept.transcript) {
        return "[Waving][1][Joy][1]";
    }
    match percept.emotion {
        Emotion::Joy => "[Joy][1][Dancing][3]",
        Emotion::Sadness => "[Sadness][1][Hug][3]",
        Emotion::Confusion => "[Confusion][1]",
        Emotion::Neutral => "[Waving][1]",
    }
}

pub fn rule_respond(percept: &PerceptResult, library: &GestureLibrary) -> ResponderOutput {
    let raw = rule_sequence_text(percept);
    // a custom library may lack some built-in names; drop those items
    let mut sequence = compile_sequence(raw, library, ResolveMode::Repair).expect("rule sequences are well formed");
    let repairs = std::mem::take(&mut sequence.notes);
    ResponderOutput {
        raw_text: raw.to_string(),
        sequence,
        repairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gestures::builtin_library;
    use crate::kinematics::PuppetModel;

    #[test]
    fn keyword_table() {
        let cases = [
            ("Wow, I had a really wonderful day!", Emotion::Joy, 1.0),
            (
                "I stayed up late to work yesterday; I am very tired.",
                Emotion::Sadness,
                1.0,
            ),
            (
                "Take a guess at how many candies I have in my pocket.",
                Emotion::Confusion,
                1.0,
            ),
            ("How many?", Emotion::Confusion, 1.0),
            ("", Emotion::Neutral, 0.5),
            ("The weather is mild.", Emotion::Neutral, 0.5),
            ("I'm so HAPPY", Emotion::Joy, 1.0),
            ("Palate", Emotion::Neutral, 0.5),
        ];
        for (text, emotion, conf) in cases {
            let p = mock_transcribe(text);
            assert_eq!((p.emotion, p.confidence), (emotion, conf), "{text}");
            assert_eq!(p.transcript, text);
        }
    }

    #[test]
    fn rule_responses() {
        let lib = builtin_library(&PuppetModel::demo()).unwrap();
        let cases = [
            ("Hi, how are you today?", "[Waving][1][Joy][1]"),
            ("Wow, I had a really wonderful day!", "[Joy][1][Dancing][3]"),
            (
                "I stayed up late to work yesterday; I am very tired.",
                "[Sadness][1][Hug][3]",
            ),
            (
                "Take a guess at how many candies I have in my pocket.",
                "[Confusion][1]",
            ),
            ("The weather is mild.", "[Waving][1]"),
        ];
        for (text, want) in cases {
            let out = rule_respond(&mock_transcribe(text), &lib);
            assert_eq!(out.raw_text, want);
            assert_eq!(out.sequence.to_text(), want);
            assert!(out.repairs.is_empty());
        }
    }

    #[test]
    fn greeting_words_are_whole_words() {
        assert!(is_greeting("hello there"));
        assert!(!is_greeting("this is high"));
        assert!(!is_greeting("how you are"));
    }
}
