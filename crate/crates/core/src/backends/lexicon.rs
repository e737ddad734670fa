//! Built-in word-list tagger used when no POS service is configured, and by
//! the mock backend for the `pos` and `events` endpoints.
//!
//! Coverage targets short video captions; it is not a general tagger.

use std::collections::HashSet;
use std::sync::OnceLock;

use super::{EventClass, PosTag, PosTags};

const NOUNS: &[&str] = &[
    "man", "woman", "person", "boy", "girl", "child", "kid", "baby", "lady", "guy", "friend",
    "player", "team", "crowd", "group", "family", "mother", "father", "teacher", "student",
    "chef", "singer", "dancer", "competitor", "surgeon", "doctor", "robot", "monster", "cartoon",
    "dog", "cat", "horse", "mustang", "bird", "fish", "cow", "sheep", "ostrich", "animal", "puppy",
    "car", "truck", "bus", "train", "bike", "bicycle", "motorcycle", "boat", "plane", "wheel",
    "skate", "ball", "toy", "doll", "table", "chair", "bed", "couch", "door", "doorway",
    "doorknob", "window", "wall", "floor", "room", "hall", "kitchen", "house", "building",
    "street", "road", "park", "field", "court", "gym", "club", "water", "pool", "beach", "sea",
    "ocean", "river", "lake", "tree", "grass", "hill", "mountain", "snow", "sky", "stage",
    "song", "music", "piano", "guitar", "drum", "cello", "violin", "instrument", "phone",
    "smartphone", "camera", "video", "screen", "computer", "game", "button", "food", "cup",
    "bowl", "plate", "knife", "spoon", "shrimp", "broth", "soup", "cake", "pizza", "icecream",
    "bread", "egg", "bottle", "cola", "frisbee", "surfboard", "sculpture", "parasol", "book",
    "paper", "box", "bag", "hat", "shirt", "t-shirt", "dress", "shoe", "hair", "face", "hand",
    "foot", "head", "arm", "leg", "finger", "toe", "mattress", "trampoline", "slingshot",
    "stick", "string", "handle", "watch", "strap", "catalogue", "trishaw", "cushion", "tail",
    "mark", "jump", "race", "match", "show", "news", "voice", "reaction", "object", "piece",
    "something", "thing", "scene", "clip", "picture", "light", "fire", "fireworks", "tool",
];

const VERB_LEMMAS: &[&str] = &[
    "walk", "run", "eat", "drink", "play", "sing", "dance", "talk", "speak", "ride", "drive",
    "cook", "cut", "throw", "catch", "take", "give", "hold", "carry", "move", "push", "pull",
    "open", "close", "jump", "sit", "stand", "swim", "climb", "fall", "drop", "pick", "put",
    "place", "show", "watch", "look", "see", "read", "write", "draw", "paint", "repair", "fix",
    "build", "make", "use", "wear", "laugh", "smile", "cry", "yell", "shout", "kick", "hit",
    "tap", "pat", "roll", "spin", "shake", "wag", "sneeze", "grab", "leave", "enter", "exit",
    "go", "come", "turn", "flip", "pour", "mix", "stir", "wash", "clean", "brush", "comb",
    "fly", "launch", "toss", "release", "pretend", "start", "begin", "stop", "finish", "perform",
    "demonstrate", "explain", "sell", "buy", "pay", "point", "press", "type", "record", "film",
    "travel", "test", "strum", "poke", "smell", "touch", "hug", "kiss", "feed", "chase", "lift",
    "slide", "skate", "surf", "ski", "fight", "box", "wave", "clap", "nod", "pet", "dig",
    "plant", "chop", "slice", "fry", "bake", "serve", "try", "dismount", "become", "sit",
];

const IRREGULAR_VERB_FORMS: &[&str] = &[
    "ran", "ate", "eaten", "drank", "drunk", "sang", "sung", "spoke", "spoken", "rode",
    "ridden", "drove", "driven", "threw", "thrown", "caught", "took", "taken", "gave", "given",
    "held", "sat", "stood", "swam", "fell", "fallen", "put", "shown", "saw", "seen", "wrote",
    "written", "drew", "drawn", "built", "made", "wore", "worn", "hit", "shook", "shaken",
    "grabbed", "left", "went", "gone", "came", "flew", "flown", "began", "begun", "sold",
    "bought", "paid", "fought", "dug", "became", "cut", "spun", "slid", "fed", "lit",
];

/// Excluded from verb counting so that "is walking" counts one event.
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "can", "will", "would", "should", "could", "may", "might", "must",
];

const ADJECTIVES: &[&str] = &[
    "red", "blue", "green", "yellow", "black", "white", "grey", "gray", "brown", "pink",
    "purple", "orange", "golden", "silver", "big", "small", "large", "little", "tiny", "giant",
    "huge", "tall", "short", "long", "young", "old", "new", "happy", "sad", "serious", "funny",
    "beautiful", "pretty", "cute", "angry", "loud", "quiet", "fast", "slow", "hot", "cold",
    "wet", "dry", "dark", "bright", "empty", "full", "heavy", "animated", "different",
    "aggressive", "plausible", "small", "wooden", "metal", "plastic", "round", "square",
    "striped", "colorful", "shiny", "dirty", "clean", "fresh", "delicious", "strange", "cruel",
    "kind", "friendly", "busy", "crowded", "outdoor", "indoor", "professional", "famous",
];

const IRREGULAR_PLURALS: &[&str] = &[
    "men", "women", "children", "people", "feet", "teeth", "mice", "geese", "peoples",
];

const DOUBLING: &[&str] = &[
    "run", "sit", "swim", "hit", "cut", "put", "stop", "drop", "chop", "grab", "hug", "dig",
    "spin", "clap", "tap", "pat", "nod", "flip", "begin", "pet", "wag", "shop", "skip", "step",
];

struct Lexicon {
    nouns: HashSet<String>,
    verb_forms: HashSet<String>,
    adjectives: HashSet<String>,
    auxiliaries: HashSet<&'static str>,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn verb_forms(lemma: &str) -> Vec<String> {
    let mut forms = vec![lemma.to_string()];
    let last = lemma.chars().last().unwrap_or('a');
    let doubled = DOUBLING.contains(&lemma);
    let stem_for_suffix = if doubled {
        format!("{lemma}{last}")
    } else {
        lemma.to_string()
    };

    // third person singular
    if lemma.ends_with('s')
        || lemma.ends_with("sh")
        || lemma.ends_with("ch")
        || lemma.ends_with('x')
        || lemma.ends_with('z')
        || lemma.ends_with('o')
    {
        forms.push(format!("{lemma}es"));
    } else if lemma.ends_with('y') && lemma.len() > 1 && !is_vowel(lemma.chars().rev().nth(1).unwrap()) {
        forms.push(format!("{}ies", &lemma[..lemma.len() - 1]));
    } else {
        forms.push(format!("{lemma}s"));
    }

    // progressive
    if let Some(stem) = lemma.strip_suffix("ie") {
        forms.push(format!("{stem}ying"));
    } else if lemma.ends_with('e') && !lemma.ends_with("ee") && lemma.len() > 2 {
        forms.push(format!("{}ing", &lemma[..lemma.len() - 1]));
    } else {
        forms.push(format!("{stem_for_suffix}ing"));
    }

    // regular past
    if lemma.ends_with('e') {
        forms.push(format!("{lemma}d"));
    } else if lemma.ends_with('y') && lemma.len() > 1 && !is_vowel(lemma.chars().rev().nth(1).unwrap()) {
        forms.push(format!("{}ied", &lemma[..lemma.len() - 1]));
    } else {
        forms.push(format!("{stem_for_suffix}ed"));
    }
    forms
}

fn plural_forms(noun: &str) -> Vec<String> {
    let mut forms = vec![noun.to_string()];
    if noun.ends_with('s') || noun.ends_with("sh") || noun.ends_with("ch") || noun.ends_with('x') {
        forms.push(format!("{noun}es"));
    } else if noun.ends_with('y') && noun.len() > 1 && !is_vowel(noun.chars().rev().nth(1).unwrap()) {
        forms.push(format!("{}ies", &noun[..noun.len() - 1]));
    } else {
        forms.push(format!("{noun}s"));
    }
    forms
}

fn lexicon() -> &'static Lexicon {
    static LEXICON: OnceLock<Lexicon> = OnceLock::new();
    LEXICON.get_or_init(|| {
        let mut nouns: HashSet<String> = NOUNS.iter().flat_map(|n| plural_forms(n)).collect();
        nouns.extend(IRREGULAR_PLURALS.iter().map(|s| s.to_string()));
        let mut verb_forms: HashSet<String> = VERB_LEMMAS.iter().flat_map(|v| verb_forms(v)).collect();
        verb_forms.extend(IRREGULAR_VERB_FORMS.iter().map(|s| s.to_string()));
        Lexicon {
            nouns,
            verb_forms,
            adjectives: ADJECTIVES.iter().map(|s| s.to_string()).collect(),
            auxiliaries: AUXILIARIES.iter().copied().collect(),
        }
    })
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '\''))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Coarse tags present anywhere in `text`. A word listed under several
/// classes contributes all of them.
pub fn tag(text: &str) -> PosTags {
    let lex = lexicon();
    let mut tags = PosTags::new();
    for token in tokens(text) {
        if lex.nouns.contains(&token) {
            tags.insert(PosTag::Noun);
        }
        if lex.verb_forms.contains(&token) && !lex.auxiliaries.contains(token.as_str()) {
            tags.insert(PosTag::Verb);
        }
        if lex.adjectives.contains(&token) {
            tags.insert(PosTag::Adj);
        }
    }
    tags
}

/// Number of tokens recognised as (non-auxiliary) verb forms.
pub fn verb_hits(text: &str) -> usize {
    let lex = lexicon();
    tokens(text)
        .filter(|t| lex.verb_forms.contains(t) && !lex.auxiliaries.contains(t.as_str()))
        .count()
}

const TEMPORAL_CONNECTIVES: &[&str] = &["and then", "before", "after"];

/// `multiple` when the caption has two or more verb hits or a temporal
/// connective ("and then", "before", "after").
pub fn classify_events(text: &str) -> EventClass {
    let normalized = crate::types::normalize_text(text);
    let padded = format!(" {normalized} ");
    let connective = TEMPORAL_CONNECTIVES
        .iter()
        .any(|c| padded.contains(&format!(" {c} ")));
    if connective || verb_hits(text) >= 2 {
        EventClass::Multiple
    } else {
        EventClass::Single
    }
}
