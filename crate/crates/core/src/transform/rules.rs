//! Rule tables behind the g-transformations: case changes, noun number and
//! verb inflection.
//!
//! Noun and verb rules are a small English lexicon plus regular suffix
//! rules. They do not need to be linguistically complete: the aligner only
//! emits a g-transformation when the rule reproduces the target token
//! exactly, and falls back to `$REP` otherwise.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{CaseRule, VerbTag};

/// Irregular singular/plural pairs.
const IRREGULAR_NOUNS: &[(&str, &str)] = &[
    ("man", "men"),
    ("woman", "women"),
    ("child", "children"),
    ("person", "people"),
    ("mouse", "mice"),
    ("goose", "geese"),
    ("foot", "feet"),
    ("tooth", "teeth"),
    ("ox", "oxen"),
    ("louse", "lice"),
    ("die", "dice"),
    ("knife", "knives"),
    ("wife", "wives"),
    ("life", "lives"),
    ("leaf", "leaves"),
    ("loaf", "loaves"),
    ("half", "halves"),
    ("wolf", "wolves"),
    ("shelf", "shelves"),
    ("thief", "thieves"),
    ("calf", "calves"),
    ("elf", "elves"),
    ("self", "selves"),
    ("scarf", "scarves"),
    ("potato", "potatoes"),
    ("tomato", "tomatoes"),
    ("hero", "heroes"),
    ("echo", "echoes"),
    ("veto", "vetoes"),
    ("cactus", "cacti"),
    ("fungus", "fungi"),
    ("nucleus", "nuclei"),
    ("syllabus", "syllabi"),
    ("analysis", "analyses"),
    ("crisis", "crises"),
    ("thesis", "theses"),
    ("basis", "bases"),
    ("diagnosis", "diagnoses"),
    ("hypothesis", "hypotheses"),
    ("oasis", "oases"),
    ("phenomenon", "phenomena"),
    ("criterion", "criteria"),
    ("datum", "data"),
    ("medium", "media"),
    ("bacterium", "bacteria"),
    ("curriculum", "curricula"),
    ("appendix", "appendices"),
    ("index", "indices"),
    ("matrix", "matrices"),
    ("vertex", "vertices"),
    ("bus", "buses"),
    ("class", "classes"),
    ("glass", "glasses"),
    ("boss", "bosses"),
];

/// base, 3sg, past, past participle, gerund.
const VERBS: &[[&str; 5]] = &[
    ["be", "is", "was", "been", "being"],
    ["have", "has", "had", "had", "having"],
    ["do", "does", "did", "done", "doing"],
    ["go", "goes", "went", "gone", "going"],
    ["say", "says", "said", "said", "saying"],
    ["get", "gets", "got", "gotten", "getting"],
    ["make", "makes", "made", "made", "making"],
    ["know", "knows", "knew", "known", "knowing"],
    ["think", "thinks", "thought", "thought", "thinking"],
    ["take", "takes", "took", "taken", "taking"],
    ["see", "sees", "saw", "seen", "seeing"],
    ["come", "comes", "came", "come", "coming"],
    ["want", "wants", "wanted", "wanted", "wanting"],
    ["look", "looks", "looked", "looked", "looking"],
    ["use", "uses", "used", "used", "using"],
    ["find", "finds", "found", "found", "finding"],
    ["give", "gives", "gave", "given", "giving"],
    ["tell", "tells", "told", "told", "telling"],
    ["work", "works", "worked", "worked", "working"],
    ["call", "calls", "called", "called", "calling"],
    ["try", "tries", "tried", "tried", "trying"],
    ["ask", "asks", "asked", "asked", "asking"],
    ["need", "needs", "needed", "needed", "needing"],
    ["feel", "feels", "felt", "felt", "feeling"],
    ["become", "becomes", "became", "become", "becoming"],
    ["leave", "leaves", "left", "left", "leaving"],
    ["put", "puts", "put", "put", "putting"],
    ["mean", "means", "meant", "meant", "meaning"],
    ["keep", "keeps", "kept", "kept", "keeping"],
    ["let", "lets", "let", "let", "letting"],
    ["begin", "begins", "began", "begun", "beginning"],
    ["seem", "seems", "seemed", "seemed", "seeming"],
    ["help", "helps", "helped", "helped", "helping"],
    ["talk", "talks", "talked", "talked", "talking"],
    ["turn", "turns", "turned", "turned", "turning"],
    ["start", "starts", "started", "started", "starting"],
    ["show", "shows", "showed", "shown", "showing"],
    ["hear", "hears", "heard", "heard", "hearing"],
    ["play", "plays", "played", "played", "playing"],
    ["run", "runs", "ran", "run", "running"],
    ["move", "moves", "moved", "moved", "moving"],
    ["like", "likes", "liked", "liked", "liking"],
    ["live", "lives", "lived", "lived", "living"],
    ["believe", "believes", "believed", "believed", "believing"],
    ["hold", "holds", "held", "held", "holding"],
    ["bring", "brings", "brought", "brought", "bringing"],
    ["happen", "happens", "happened", "happened", "happening"],
    ["write", "writes", "wrote", "written", "writing"],
    ["provide", "provides", "provided", "provided", "providing"],
    ["sit", "sits", "sat", "sat", "sitting"],
    ["stand", "stands", "stood", "stood", "standing"],
    ["lose", "loses", "lost", "lost", "losing"],
    ["pay", "pays", "paid", "paid", "paying"],
    ["meet", "meets", "met", "met", "meeting"],
    ["include", "includes", "included", "included", "including"],
    ["continue", "continues", "continued", "continued", "continuing"],
    ["set", "sets", "set", "set", "setting"],
    ["learn", "learns", "learned", "learned", "learning"],
    ["change", "changes", "changed", "changed", "changing"],
    ["lead", "leads", "led", "led", "leading"],
    ["understand", "understands", "understood", "understood", "understanding"],
    ["watch", "watches", "watched", "watched", "watching"],
    ["follow", "follows", "followed", "followed", "following"],
    ["stop", "stops", "stopped", "stopped", "stopping"],
    ["create", "creates", "created", "created", "creating"],
    ["speak", "speaks", "spoke", "spoken", "speaking"],
    ["read", "reads", "read", "read", "reading"],
    ["spend", "spends", "spent", "spent", "spending"],
    ["grow", "grows", "grew", "grown", "growing"],
    ["open", "opens", "opened", "opened", "opening"],
    ["walk", "walks", "walked", "walked", "walking"],
    ["win", "wins", "won", "won", "winning"],
    ["offer", "offers", "offered", "offered", "offering"],
    ["remember", "remembers", "remembered", "remembered", "remembering"],
    ["love", "loves", "loved", "loved", "loving"],
    ["consider", "considers", "considered", "considered", "considering"],
    ["appear", "appears", "appeared", "appeared", "appearing"],
    ["buy", "buys", "bought", "bought", "buying"],
    ["wait", "waits", "waited", "waited", "waiting"],
    ["serve", "serves", "served", "served", "serving"],
    ["die", "dies", "died", "died", "dying"],
    ["send", "sends", "sent", "sent", "sending"],
    ["expect", "expects", "expected", "expected", "expecting"],
    ["build", "builds", "built", "built", "building"],
    ["stay", "stays", "stayed", "stayed", "staying"],
    ["fall", "falls", "fell", "fallen", "falling"],
    ["cut", "cuts", "cut", "cut", "cutting"],
    ["reach", "reaches", "reached", "reached", "reaching"],
    ["kill", "kills", "killed", "killed", "killing"],
    ["eat", "eats", "ate", "eaten", "eating"],
    ["drink", "drinks", "drank", "drunk", "drinking"],
    ["sleep", "sleeps", "slept", "slept", "sleeping"],
    ["swim", "swims", "swam", "swum", "swimming"],
    ["sing", "sings", "sang", "sung", "singing"],
    ["drive", "drives", "drove", "driven", "driving"],
    ["fly", "flies", "flew", "flown", "flying"],
    ["break", "breaks", "broke", "broken", "breaking"],
    ["choose", "chooses", "chose", "chosen", "choosing"],
    ["forget", "forgets", "forgot", "forgotten", "forgetting"],
    ["teach", "teaches", "taught", "taught", "teaching"],
    ["catch", "catches", "caught", "caught", "catching"],
    ["sell", "sells", "sold", "sold", "selling"],
    ["wear", "wears", "wore", "worn", "wearing"],
    ["study", "studies", "studied", "studied", "studying"],
    ["carry", "carries", "carried", "carried", "carrying"],
    ["cook", "cooks", "cooked", "cooked", "cooking"],
    ["visit", "visits", "visited", "visited", "visiting"],
];

struct Tables {
    noun_toggle: HashMap<&'static str, &'static str>,
    /// Every known verb form (lowercase) to its lexicon row.
    verb_rows: HashMap<&'static str, usize>,
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut noun_toggle = HashMap::new();
        for &(sg, pl) in IRREGULAR_NOUNS {
            noun_toggle.insert(sg, pl);
            noun_toggle.insert(pl, sg);
        }
        let mut verb_rows = HashMap::new();
        for (row, forms) in VERBS.iter().enumerate() {
            for f in forms {
                // First row wins for shared forms ("lives", "read").
                verb_rows.entry(*f).or_insert(row);
            }
        }
        Tables {
            noun_toggle,
            verb_rows,
        }
    })
}

/// Applies a case rule.
pub fn apply_case(token: &str, rule: CaseRule) -> String {
    match rule {
        CaseRule::UpFirst => map_first(token, |c| c.to_uppercase().collect()),
        CaseRule::LowFirst => map_first(token, |c| c.to_lowercase().collect()),
        CaseRule::AllUp => token.to_uppercase(),
        CaseRule::AllLow => token.to_lowercase(),
    }
}

fn map_first(token: &str, f: impl Fn(char) -> String) -> String {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) => f(c) + chars.as_str(),
        None => String::new(),
    }
}

fn is_lower_alpha(w: &str) -> bool {
    !w.is_empty() && w.chars().all(|c| c.is_ascii_lowercase())
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Capitalization is carried over from the input: the rules run on the
/// lowercased word and the first letter is restored when it was uppercase.
fn with_case(token: &str, f: impl Fn(&str) -> Option<String>) -> Option<String> {
    let first_upper = token.chars().next()?.is_uppercase();
    let rest_lower = token.chars().skip(1).all(|c| !c.is_uppercase());
    if !rest_lower {
        return None;
    }
    let lower = token.to_lowercase();
    let out = f(&lower)?;
    Some(if first_upper {
        apply_case(&out, CaseRule::UpFirst)
    } else {
        out
    })
}

fn regular_plural(w: &str) -> String {
    let bytes = w.as_bytes();
    let n = bytes.len();
    if n >= 2 && w.ends_with('y') && !is_vowel(bytes[n - 2] as char) {
        format!("{}ies", &w[..n - 1])
    } else if ["s", "x", "z", "ch", "sh"].iter().any(|s| w.ends_with(s)) {
        format!("{w}es")
    } else {
        format!("{w}s")
    }
}

fn regular_singular(w: &str) -> Option<String> {
    let n = w.len();
    if n > 3 && w.ends_with("ies") {
        Some(format!("{}y", &w[..n - 3]))
    } else if n > 3 && ["ses", "xes", "zes", "ches", "shes"].iter().any(|s| w.ends_with(s)) {
        Some(w[..n - 2].to_string())
    } else if n > 1 && w.ends_with('s') && !w.ends_with("ss") {
        Some(w[..n - 1].to_string())
    } else {
        None
    }
}

/// Toggles a noun between singular and plural. Words ending in `s` (but
/// not `ss`) are treated as plural.
pub fn toggle_number(token: &str) -> Option<String> {
    with_case(token, |w| {
        if let Some(other) = tables().noun_toggle.get(w) {
            return Some(other.to_string());
        }
        if !is_lower_alpha(w) {
            return None;
        }
        if w.ends_with('s') && !w.ends_with("ss") {
            regular_singular(w)
        } else {
            Some(regular_plural(w))
        }
    })
}

fn regular_lemma(w: &str) -> String {
    let n = w.len();
    if n > 4 && (w.ends_with("ies") || w.ends_with("ied")) {
        format!("{}y", &w[..n - 3])
    } else if n > 5 && w.ends_with("ing") {
        w[..n - 3].to_string()
    } else if n > 3 && (w.ends_with("ed") || ["ses", "xes", "zes", "ches", "shes"].iter().any(|s| w.ends_with(s))) {
        w[..n - 2].to_string()
    } else if n > 2 && w.ends_with('s') && !w.ends_with("ss") {
        w[..n - 1].to_string()
    } else {
        w.to_string()
    }
}

fn regular_inflect(lemma: &str, tag: VerbTag) -> String {
    let n = lemma.len();
    let consonant_y =
        n >= 2 && lemma.ends_with('y') && !is_vowel(lemma.as_bytes()[n - 2] as char);
    match tag {
        VerbTag::Base => lemma.to_string(),
        VerbTag::ThirdSingular => regular_plural(lemma),
        VerbTag::Past | VerbTag::PastParticiple => {
            if lemma.ends_with('e') {
                format!("{lemma}d")
            } else if consonant_y {
                format!("{}ied", &lemma[..n - 1])
            } else {
                format!("{lemma}ed")
            }
        }
        VerbTag::Gerund => {
            if lemma.ends_with('e') && !lemma.ends_with("ee") && n > 2 {
                format!("{}ing", &lemma[..n - 1])
            } else {
                format!("{lemma}ing")
            }
        }
    }
}

/// Re-inflects a verb to `tag`. Lexicon verbs use their table row; other
/// lowercase alphabetic words go through regular suffix rules.
pub fn inflect_verb(token: &str, tag: VerbTag) -> Option<String> {
    with_case(token, |w| {
        if let Some(&row) = tables().verb_rows.get(w) {
            return Some(VERBS[row][tag.index()].to_string());
        }
        if !is_lower_alpha(w) || w.len() < 2 {
            return None;
        }
        Some(regular_inflect(&regular_lemma(w), tag))
    })
}

/// Lexicon tag of a known verb form, if the word is in the verb table.
pub fn known_verb_tags(token: &str) -> Vec<VerbTag> {
    let lower = token.to_lowercase();
    match tables().verb_rows.get(lower.as_str()) {
        Some(&row) => VerbTag::ALL
            .iter()
            .copied()
            .filter(|t| VERBS[row][t.index()] == lower)
            .collect(),
        None => Vec::new(),
    }
}

/// Splits a hyphenated token into its non-empty parts. `None` unless at
/// least two parts result.
pub fn split_token(token: &str) -> Option<Vec<String>> {
    if !token.contains('-') {
        return None;
    }
    let parts: Vec<String> = token
        .split('-')
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect();
    (parts.len() >= 2).then_some(parts)
}

/// Every verb base form in the lexicon.
pub fn verb_lexicon() -> impl Iterator<Item = &'static [&'static str; 5]> {
    VERBS.iter()
}
