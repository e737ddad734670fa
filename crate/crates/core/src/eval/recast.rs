//! Turning a multiple-choice question into one statement per option.

use std::sync::OnceLock;

use regex::Regex;

use crate::backends::{Gateway, GenerationParams};
use crate::genfilter::prompts::QA_RECAST;

use super::EvalError;

pub const CHOICE_LETTERS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

const PLACEHOLDER_TAIL: &str =
    "Question: Q\nChoices:\n(A) A1\n(B) A2\n(C) A3\n(D) A4\n(E) A5\nImperative Statements for every option:\n";

/// The recasting template with its final question block filled in.
pub fn render_recast_prompt(question: &str, choices: &[String]) -> Result<String, EvalError> {
    if choices.len() != 5 {
        return Err(EvalError::Invalid(format!("expected 5 choices, got {}", choices.len())));
    }
    let head = QA_RECAST
        .strip_suffix(PLACEHOLDER_TAIL)
        .expect("recast template ends with the placeholder block");
    let mut prompt = format!("{head}Question: {}\nChoices:\n", question.trim());
    for (letter, choice) in CHOICE_LETTERS.iter().zip(choices) {
        prompt.push_str(&format!("({letter}) {}\n", choice.trim()));
    }
    prompt.push_str("Imperative Statements for every option:\n");
    Ok(prompt)
}

fn statement_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*\(([A-Ea-e])\)\s*(\S.*?)\s*$").unwrap())
}

/// Extracts the five "(X) statement" lines, which must appear once each in
/// option order. Other lines are ignored.
pub fn parse_recast(raw: &str) -> Result<[String; 5], EvalError> {
    let found: Vec<(char, String)> = raw
        .lines()
        .filter_map(|line| {
            let cap = statement_regex().captures(line)?;
            let letter = cap[1].chars().next()?.to_ascii_uppercase();
            Some((letter, cap[2].to_string()))
        })
        .collect();
    if found.len() != 5 {
        return Err(EvalError::RecastParse(format!("expected 5 statements, found {}", found.len())));
    }
    let letters: Vec<char> = found.iter().map(|(l, _)| *l).collect();
    if letters != CHOICE_LETTERS {
        return Err(EvalError::RecastParse(format!("options out of order: {letters:?}")));
    }
    let mut it = found.into_iter().map(|(_, s)| s);
    Ok(std::array::from_fn(|_| it.next().unwrap()))
}

pub fn recast_qa(
    gateway: &Gateway,
    question: &str,
    choices: &[String],
    params: &GenerationParams,
) -> Result<[String; 5], EvalError> {
    let prompt = render_recast_prompt(question, choices)?;
    parse_recast(&gateway.generate(&prompt, params)?)
}
