//! Templated instruction generation and its rule-based inverse.

use rand::Rng;

use crate::encoder::tokenize;
use crate::scene::Relation;

use super::DatagenError;

const VERBS: [&str; 4] = ["put", "place", "move", "set"];

/// Templates per relation; `{v}` is the verb slot, `{m}` the movable
/// descriptor, `{r}` / `{r1}` / `{r2}` the reference descriptor(s).
fn templates(relation: Relation) -> &'static [&'static str] {
    match relation {
        Relation::Left => &[
            "{v} the {m} to the left of the {r}.",
            "{v} the {m} on the left side of the {r}.",
            "{v} the {m} left of the {r}.",
            "could you {v} the {m} to the left of the {r}?",
            "{v} the {m} so it sits to the left of the {r}.",
        ],
        Relation::Right => &[
            "{v} the {m} to the right of the {r}.",
            "{v} the {m} on the right side of the {r}.",
            "{v} the {m} right of the {r}.",
            "could you {v} the {m} to the right of the {r}?",
            "{v} the {m} so it sits to the right of the {r}.",
        ],
        Relation::Front => &[
            "{v} the {m} in front of the {r}.",
            "{v} the {m} to the front of the {r}.",
            "could you {v} the {m} in front of the {r}?",
            "{v} the {m} so it sits in front of the {r}.",
            "{v} the {m} just in front of the {r}.",
        ],
        Relation::Behind => &[
            "{v} the {m} behind the {r}.",
            "{v} the {m} right behind the {r}.",
            "could you {v} the {m} behind the {r}?",
            "{v} the {m} so it sits behind the {r}.",
            "{v} the {m} directly behind the {r}.",
        ],
        Relation::OnTopOf => &[
            "{v} the {m} on top of the {r}.",
            "{v} the {m} onto the {r}.",
            "could you {v} the {m} on top of the {r}?",
            "{v} the {m} so it rests on top of the {r}.",
            "stack the {m} on top of the {r}.",
        ],
        Relation::Between => &[
            "{v} the {m} between the {r1} and the {r2}.",
            "{v} the {m} in between the {r1} and the {r2}.",
            "could you {v} the {m} between the {r1} and the {r2}?",
            "{v} the {m} so it sits between the {r1} and the {r2}.",
            "{v} the {m} right between the {r1} and the {r2}.",
        ],
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Fills a seeded template/verb choice with the object descriptors.
pub fn generate_instruction<R: Rng>(
    relation: Relation,
    movable: &str,
    references: &[&str],
    rng: &mut R,
) -> Result<String, DatagenError> {
    let bank = templates(relation);
    if bank.is_empty() {
        return Err(DatagenError::EmptyTemplateBank);
    }
    if references.len() < relation.reference_count() {
        return Err(DatagenError::BadRoles(format!(
            "{relation:?} needs {} references, got {}",
            relation.reference_count(),
            references.len()
        )));
    }
    let template = bank[rng.gen_range(0..bank.len())];
    let verb = VERBS[rng.gen_range(0..VERBS.len())];
    let mut text = template
        .replace("{v}", verb)
        .replace("{m}", movable);
    if relation == Relation::Between {
        text = text.replace("{r1}", references[0]).replace("{r2}", references[1]);
    } else {
        text = text.replace("{r}", references[0]);
    }
    Ok(capitalize(&text))
}

/// What a parsed instruction recovers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedInstruction {
    pub movable: String,
    pub references: Vec<String>,
    pub relation: Relation,
}

fn find_subsequence(haystack: &[String], needle: &[String]) -> Option<usize> {
    if needle.is_empty() || haystack.len() < needle.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

fn detect_relation(tokens: &[String]) -> Option<Relation> {
    let has = |w: &str| tokens.iter().any(|t| t == w);
    // "left"/"right"/"front"/"behind" before "on": phrasings like
    // "on the left side" contain "on" too
    // "behind" outranks "right": "right behind" uses "right" as an
    // intensifier, and "right between" is covered by the between check
    if has("between") {
        Some(Relation::Between)
    } else if has("behind") {
        Some(Relation::Behind)
    } else if has("left") {
        Some(Relation::Left)
    } else if has("right") {
        Some(Relation::Right)
    } else if has("front") {
        Some(Relation::Front)
    } else if has("top") || has("onto") || has("on") || has("stack") {
        Some(Relation::OnTopOf)
    } else {
        None
    }
}

/// Inverts the template grammar: detects the relation keyword, then
/// matches the known scene descriptors by order of mention. The first
/// mentioned descriptor is the movable object; the rest are references.
pub fn parse_instruction(
    text: &str,
    descriptors: &[String],
) -> Result<ParsedInstruction, DatagenError> {
    let tokens = tokenize(text);
    let relation = detect_relation(&tokens)
        .ok_or_else(|| DatagenError::UnparseableInstruction(text.to_string()))?;

    let mut mentions: Vec<(usize, &String)> = Vec::new();
    for d in descriptors {
        let needle = tokenize(d);
        if let Some(pos) = find_subsequence(&tokens, &needle) {
            mentions.push((pos, d));
        }
    }
    mentions.sort_by_key(|&(pos, _)| pos);

    if mentions.len() < 1 + relation.reference_count() {
        return Err(DatagenError::UnparseableInstruction(text.to_string()));
    }
    let movable = mentions[0].1.clone();
    let references: Vec<String> = mentions[1..1 + relation.reference_count()]
        .iter()
        .map(|(_, d)| (*d).clone())
        .collect();
    Ok(ParsedInstruction { movable, references, relation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn left_instruction_parses_back() {
        let text = "Place the red box to the left of the blue mug.";
        let descriptors = vec!["red box".to_string(), "blue mug".to_string(), "green can".to_string()];
        let parsed = parse_instruction(text, &descriptors).unwrap();
        assert_eq!(parsed.movable, "red box");
        assert_eq!(parsed.references, vec!["blue mug".to_string()]);
        assert_eq!(parsed.relation, Relation::Left);
    }

    #[test]
    fn unknown_relation_keyword_fails() {
        let descriptors = vec!["red box".to_string(), "blue mug".to_string()];
        assert!(matches!(
            parse_instruction("Rotate the red box near the blue mug.", &descriptors),
            Err(DatagenError::UnparseableInstruction(_))
        ));
    }

    #[test]
    fn between_recovers_references_in_mention_order() {
        let descriptors = vec![
            "red box".to_string(),
            "blue mug".to_string(),
            "green can".to_string(),
        ];
        let text = "Move the red box between the green can and the blue mug.";
        let parsed = parse_instruction(text, &descriptors).unwrap();
        assert_eq!(parsed.relation, Relation::Between);
        assert_eq!(parsed.references, vec!["green can".to_string(), "blue mug".to_string()]);
    }

    #[test]
    fn generate_then_parse_is_identity_for_all_relations() {
        let descriptors = vec![
            "red box".to_string(),
            "blue mug".to_string(),
            "green can".to_string(),
        ];
        for relation in Relation::ALL {
            for trial in 0..50u64 {
                let mut rng = derive_rng(trial, "instr-test", relation as u64);
                let refs: Vec<&str> = if relation == Relation::Between {
                    vec![&descriptors[1], &descriptors[2]]
                } else {
                    vec![&descriptors[1]]
                };
                let text = generate_instruction(relation, &descriptors[0], &refs, &mut rng).unwrap();
                let parsed = parse_instruction(&text, &descriptors).unwrap();
                assert_eq!(parsed.relation, relation, "{text}");
                assert_eq!(parsed.movable, descriptors[0], "{text}");
                let want: Vec<String> = refs.iter().map(|s| s.to_string()).collect();
                assert_eq!(parsed.references, want, "{text}");
            }
        }
    }

    #[test]
    fn instruction_names_all_references() {
        let mut rng = derive_rng(1, "instr-between", 0);
        let text =
            generate_instruction(Relation::Between, "red box", &["blue mug", "green can"], &mut rng)
                .unwrap();
        assert!(text.contains("blue mug") && text.contains("green can"));
    }
}
