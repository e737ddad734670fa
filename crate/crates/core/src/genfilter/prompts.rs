//! Embedded prompt templates and their checksum manifest.

use sha2::{Digest, Sha256};

use crate::types::MisalignmentType;

pub const CAPTION_SLOT: &str = "<insert caption>";

const OBJECT: &str = include_str!("../../templates/object.txt");
const ACTION: &str = include_str!("../../templates/action.txt");
const ATTRIBUTE: &str = include_str!("../../templates/attribute.txt");
const COUNT: &str = include_str!("../../templates/count.txt");
const RELATION: &str = include_str!("../../templates/relation.txt");
const HALLUCINATION: &str = include_str!("../../templates/hallucination.txt");
const EVENT_ORDER: &str = include_str!("../../templates/event_order.txt");
pub(crate) const QA_RECAST: &str = include_str!("../../templates/qa_recast.txt");
const MANIFEST: &str = include_str!("../../templates/MANIFEST.sha256");

pub fn template_file(m: MisalignmentType) -> &'static str {
    match m {
        MisalignmentType::Object => "object.txt",
        MisalignmentType::Action => "action.txt",
        MisalignmentType::Attribute => "attribute.txt",
        MisalignmentType::Count => "count.txt",
        MisalignmentType::Relation => "relation.txt",
        MisalignmentType::Hallucination => "hallucination.txt",
        MisalignmentType::EventOrder => "event_order.txt",
    }
}

pub fn template(m: MisalignmentType) -> &'static str {
    match m {
        MisalignmentType::Object => OBJECT,
        MisalignmentType::Action => ACTION,
        MisalignmentType::Attribute => ATTRIBUTE,
        MisalignmentType::Count => COUNT,
        MisalignmentType::Relation => RELATION,
        MisalignmentType::Hallucination => HALLUCINATION,
        MisalignmentType::EventOrder => EVENT_ORDER,
    }
}

/// Label that precedes the contrast caption in completions for `m`.
pub fn contrast_label(m: MisalignmentType) -> &'static str {
    match m {
        MisalignmentType::Object => "Sentence + Object Misalignment",
        MisalignmentType::Action => "Sentence + Action Misalignment",
        MisalignmentType::Attribute => "Sentence + Attribute Misalignment",
        MisalignmentType::Count => "Sentence + Counting Misalignment",
        MisalignmentType::Relation => "Sentence + Relation Misalignment",
        MisalignmentType::Hallucination => "Sentence + Hallucination",
        MisalignmentType::EventOrder => "Sentence + Event Misalignment",
    }
}

/// The template for `m` with its caption slot filled.
pub fn render_prompt(m: MisalignmentType, caption: &str) -> String {
    template(m).replacen(CAPTION_SLOT, caption.trim(), 1)
}

fn sha256_hex(data: &str) -> String {
    hex::encode(Sha256::digest(data.as_bytes()))
}

fn embedded() -> Vec<(&'static str, &'static str)> {
    let mut files: Vec<_> = MisalignmentType::ALL
        .iter()
        .map(|m| (template_file(*m), template(*m)))
        .collect();
    files.push(("qa_recast.txt", QA_RECAST));
    files
}

/// Checks every embedded template against the shipped manifest.
pub fn verify_templates() -> Result<(), String> {
    for (file, body) in embedded() {
        let expected = MANIFEST
            .lines()
            .find_map(|l| {
                let (hash, name) = l.split_once("  ")?;
                (name.trim() == file).then_some(hash)
            })
            .ok_or_else(|| format!("{file} missing from template manifest"))?;
        let actual = sha256_hex(body);
        if actual != expected {
            return Err(format!("{file}: checksum {actual} != manifest {expected}"));
        }
    }
    Ok(())
}

/// Digest of the manifest itself; pins the whole template set.
pub fn templates_checksum() -> String {
    sha256_hex(MANIFEST)
}
