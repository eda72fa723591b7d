//! Bracketed token serialization of text plans, and its inverse.
//!
//! Grammar (single-space separated tokens):
//! `node := ENTITY edge*`, `edge := DIR relTok+ "[" node "]"` where DIR is
//! `->` (forward) or `<-` (reverse). Sentences are joined by a standalone
//! `.` token; there is no trailing separator after the final sentence.

use thiserror::Error;

use crate::corpus::InputGraph;
use crate::plan::{Direction, PlanEdge, PlanNode, SentencePlan, TextPlan};

#[derive(Debug, Error)]
pub enum LinearizeError {
    #[error("entity id {0:?} contains a reserved token")]
    ReservedToken(String),
    #[error("parse error at token {index}: {message}")]
    Parse { index: usize, message: String },
    #[error("unknown relation token sequence {tokens:?} at token {index}")]
    UnknownRelation { index: usize, tokens: Vec<String> },
    #[error("unknown entity {token:?} at token {index}")]
    UnknownEntity { index: usize, token: String },
    #[error("unbalanced brackets")]
    UnbalancedBrackets,
    #[error("parsed plan does not express every graph triple exactly once")]
    MatchingViolation,
}

/// Arrow tokens used for directions; ASCII is the interchange default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ArrowStyle {
    #[default]
    Ascii,
    Unicode,
}

impl ArrowStyle {
    fn token(&self, d: Direction) -> &'static str {
        match (self, d) {
            (ArrowStyle::Ascii, Direction::Forward) => "->",
            (ArrowStyle::Ascii, Direction::Reverse) => "<-",
            (ArrowStyle::Unicode, Direction::Forward) => "\u{2192}",
            (ArrowStyle::Unicode, Direction::Reverse) => "\u{2190}",
        }
    }
}

fn parse_direction(token: &str) -> Option<Direction> {
    match token {
        "->" | "\u{2192}" => Some(Direction::Forward),
        "<-" | "\u{2190}" => Some(Direction::Reverse),
        _ => None,
    }
}

const RESERVED: [&str; 6] = ["[", "]", "->", "<-", "\u{2192}", "\u{2190}"];

fn entity_token(id: &str) -> Result<&str, LinearizeError> {
    if id.split_whitespace().count() != 1 || RESERVED.contains(&id) {
        return Err(LinearizeError::ReservedToken(id.to_string()));
    }
    Ok(id)
}

/// Token stream of a linearized text plan, with sentence segmentation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearPlan {
    pub tokens: Vec<String>,
    /// Start index of each sentence segment in `tokens`.
    pub sentence_boundaries: Vec<usize>,
}

impl LinearPlan {
    pub fn to_text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn push_node(node: &PlanNode, style: ArrowStyle, out: &mut Vec<String>) -> Result<(), LinearizeError> {
    out.push(entity_token(&node.entity.id)?.to_string());
    for PlanEdge {
        relation,
        direction,
        child,
    } in &node.children
    {
        out.push(style.token(*direction).to_string());
        out.extend(relation.tokens.iter().cloned());
        out.push("[".to_string());
        push_node(child, style, out)?;
        out.push("]".to_string());
    }
    Ok(())
}

/// Pre-order linearization of one sentence plan.
pub fn linearize_sentence_plan(plan: &SentencePlan) -> Result<String, LinearizeError> {
    linearize_sentence_plan_with(plan, ArrowStyle::Ascii)
}

pub fn linearize_sentence_plan_with(
    plan: &SentencePlan,
    style: ArrowStyle,
) -> Result<String, LinearizeError> {
    let mut tokens = Vec::new();
    push_node(&plan.root, style, &mut tokens)?;
    Ok(tokens.join(" "))
}

/// Sentence linearizations joined by `" . "`, no trailing separator.
pub fn linearize_text_plan(plan: &TextPlan) -> Result<String, LinearizeError> {
    linearize_text_plan_with(plan, ArrowStyle::Ascii)
}

pub fn linearize_text_plan_with(plan: &TextPlan, style: ArrowStyle) -> Result<String, LinearizeError> {
    let parts: Result<Vec<String>, _> = plan
        .sentences
        .iter()
        .map(|s| linearize_sentence_plan_with(s, style))
        .collect();
    Ok(parts?.join(" . "))
}

/// Tokenized linearization with sentence boundaries.
pub fn linearize(plan: &TextPlan, style: ArrowStyle) -> Result<LinearPlan, LinearizeError> {
    let mut tokens = Vec::new();
    let mut sentence_boundaries = Vec::new();
    for (i, s) in plan.sentences.iter().enumerate() {
        if i > 0 {
            tokens.push(".".to_string());
        }
        sentence_boundaries.push(tokens.len());
        push_node(&s.root, style, &mut tokens)?;
    }
    Ok(LinearPlan {
        tokens,
        sentence_boundaries,
    })
}

struct Parser<'a> {
    tokens: Vec<&'a str>,
    pos: usize,
    graph: &'a InputGraph,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.tokens.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<&'a str> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn parse_node(&mut self) -> Result<PlanNode, LinearizeError> {
        let index = self.pos;
        let token = self.next().ok_or(LinearizeError::Parse {
            index,
            message: "expected entity, found end of input".into(),
        })?;
        if RESERVED.contains(&token) || token == "." {
            return Err(LinearizeError::Parse {
                index,
                message: format!("expected entity, found {token:?}"),
            });
        }
        let entity = self
            .graph
            .entity_by_id(token)
            .ok_or_else(|| LinearizeError::UnknownEntity {
                index,
                token: token.to_string(),
            })?
            .clone();
        let mut children = Vec::new();
        while let Some(direction) = self.peek().and_then(parse_direction) {
            self.next();
            // relation tokens run until the opening bracket
            let rel_start = self.pos;
            let mut rel_tokens: Vec<String> = Vec::new();
            while let Some(t) = self.peek() {
                if t == "[" {
                    break;
                }
                if RESERVED.contains(&t) || t == "." {
                    return Err(LinearizeError::Parse {
                        index: self.pos,
                        message: format!("unexpected token {t:?} in relation"),
                    });
                }
                rel_tokens.push(t.to_string());
                self.next();
            }
            if rel_tokens.is_empty() {
                return Err(LinearizeError::Parse {
                    index: rel_start,
                    message: "missing relation tokens".into(),
                });
            }
            // the bracket delimits the token run; ties between relations with
            // identical token sequences go to the first-declared one
            let relation = self
                .graph
                .relations()
                .into_iter()
                .find(|r| r.tokens == rel_tokens)
                .ok_or_else(|| LinearizeError::UnknownRelation {
                    index: rel_start,
                    tokens: rel_tokens.clone(),
                })?
                .clone();
            match self.next() {
                Some("[") => {}
                _ => return Err(LinearizeError::UnbalancedBrackets),
            }
            let child = self.parse_node()?;
            match self.next() {
                Some("]") => {}
                _ => return Err(LinearizeError::UnbalancedBrackets),
            }
            children.push(PlanEdge {
                relation,
                direction,
                child,
            });
        }
        Ok(PlanNode { entity, children })
    }
}

/// Parse a linearized text plan back into a [`TextPlan`], resolving entities
/// and relations against `graph` and verifying the MATCHING invariant.
pub fn parse_linearized(text: &str, graph: &InputGraph) -> Result<TextPlan, LinearizeError> {
    let all_tokens: Vec<&str> = text.split_whitespace().collect();
    if all_tokens.is_empty() {
        return Err(LinearizeError::Parse {
            index: 0,
            message: "empty input".into(),
        });
    }
    // split into sentence segments on "." tokens outside brackets
    let mut segments: Vec<Vec<&str>> = vec![Vec::new()];
    let mut depth: isize = 0;
    for &t in &all_tokens {
        match t {
            "[" => depth += 1,
            "]" => {
                depth -= 1;
                if depth < 0 {
                    return Err(LinearizeError::UnbalancedBrackets);
                }
            }
            "." if depth == 0 => {
                segments.push(Vec::new());
                continue;
            }
            _ => {}
        }
        segments.last_mut().unwrap().push(t);
    }
    if depth != 0 {
        return Err(LinearizeError::UnbalancedBrackets);
    }

    let mut sentences = Vec::new();
    for seg in segments {
        let mut parser = Parser {
            tokens: seg,
            pos: 0,
            graph,
        };
        let root = parser.parse_node()?;
        if parser.pos != parser.tokens.len() {
            return Err(LinearizeError::Parse {
                index: parser.pos,
                message: format!("trailing tokens: {:?}", &parser.tokens[parser.pos..]),
            });
        }
        sentences.push(SentencePlan { root });
    }
    let plan = TextPlan { sentences };
    if !plan.matches(graph) {
        return Err(LinearizeError::MatchingViolation);
    }
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_triple_line;
    use crate::plan::enumerate_text_plans;

    fn fig1_graph() -> InputGraph {
        InputGraph::new(
            [
                "AIP_Advances | editor | A.T._Charlie_Johnson",
                "A.T._Charlie_Johnson | almaMater | Harvard_University",
                "AIP_Advances | ISSN_number | \"2158-3226\"",
                "A.T._Charlie_Johnson | residence | United_States",
            ]
            .iter()
            .map(|l| parse_triple_line(l).unwrap())
            .collect(),
        )
        .unwrap()
    }

    const FIG1C: &str = "A.T._Charlie_Johnson <- editor [ AIP_Advances -> issn number [ 2158-3226 ] ] . A.T._Charlie_Johnson -> residence [ United_States ] -> alma mater [ Harvard_University ]";

    #[test]
    fn fig1_plan_linearizes_to_fig1c() {
        let g = fig1_graph();
        let plan = parse_linearized(FIG1C, &g).unwrap();
        assert_eq!(linearize_text_plan(&plan).unwrap(), FIG1C);
        assert_eq!(
            linearize_sentence_plan(&plan.sentences[0]).unwrap(),
            "A.T._Charlie_Johnson <- editor [ AIP_Advances -> issn number [ 2158-3226 ] ]"
        );
        assert_eq!(
            linearize_sentence_plan(&plan.sentences[1]).unwrap(),
            "A.T._Charlie_Johnson -> residence [ United_States ] -> alma mater [ Harvard_University ]"
        );
        // pre-order entity sequence with the repeated entity at position 4
        let seq: Vec<&str> = plan.entity_sequence().iter().map(|e| e.id.as_str()).collect();
        assert_eq!(
            seq,
            [
                "A.T._Charlie_Johnson",
                "AIP_Advances",
                "2158-3226",
                "A.T._Charlie_Johnson",
                "United_States",
                "Harvard_University"
            ]
        );
    }

    #[test]
    fn unicode_arrows() {
        let g = fig1_graph();
        let plan = parse_linearized(FIG1C, &g).unwrap();
        let uni = linearize_text_plan_with(&plan, ArrowStyle::Unicode).unwrap();
        assert!(uni.contains("\u{2190} editor"));
        assert_eq!(parse_linearized(&uni, &g).unwrap(), plan);
    }

    #[test]
    fn round_trip_all_plans() {
        let g = InputGraph::new(
            ["John | birthPlace | London", "John | employer | IBM"]
                .iter()
                .map(|l| parse_triple_line(l).unwrap())
                .collect(),
        )
        .unwrap();
        for plan in enumerate_text_plans(&g, None).unwrap() {
            let text = linearize_text_plan(&plan).unwrap();
            assert_eq!(parse_linearized(&text, &g).unwrap(), plan);
        }
    }

    #[test]
    fn missing_relation_tokens_rejected() {
        let g = InputGraph::new(vec![parse_triple_line("John | employer | IBM").unwrap()]).unwrap();
        assert!(matches!(
            parse_linearized("John -> [ IBM ]", &g),
            Err(LinearizeError::Parse { .. })
        ));
    }

    #[test]
    fn single_node_against_nonempty_graph_is_matching_violation() {
        let g = InputGraph::new(vec![parse_triple_line("John | employer | IBM").unwrap()]).unwrap();
        assert!(matches!(
            parse_linearized("John", &g),
            Err(LinearizeError::MatchingViolation)
        ));
    }

    #[test]
    fn bracket_and_vocabulary_errors() {
        let g = InputGraph::new(vec![parse_triple_line("John | employer | IBM").unwrap()]).unwrap();
        assert!(matches!(
            parse_linearized("John -> employer [ IBM", &g),
            Err(LinearizeError::UnbalancedBrackets)
        ));
        assert!(matches!(
            parse_linearized("John -> boss [ IBM ]", &g),
            Err(LinearizeError::UnknownRelation { .. })
        ));
        assert!(matches!(
            parse_linearized("Jane -> employer [ IBM ]", &g),
            Err(LinearizeError::UnknownEntity { .. })
        ));
    }

    #[test]
    fn reserved_entity_ids_rejected() {
        use crate::corpus::Entity;
        use crate::plan::PlanNode;
        let plan = SentencePlan {
            root: PlanNode {
                entity: Entity::from_raw("->"),
                children: vec![],
            },
        };
        assert!(matches!(
            linearize_sentence_plan(&plan),
            Err(LinearizeError::ReservedToken(_))
        ));
    }
}
