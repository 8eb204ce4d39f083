//! Online log-template mining with a fixed-depth prefix tree.
//!
//! Every raw log line is reduced to a dense integer symbol. Lines are
//! bucketed by token count, then routed through a few leading tokens to a
//! leaf that holds candidate template groups. The best group above the
//! similarity threshold absorbs the line (divergent positions become
//! wildcards); otherwise a new group is created.
//!
//! ```text
//!             root
//!              |
//!         token count (3)
//!              |
//!          "login"            <- depth - 3 leading tokens
//!              |
//!   [login user=<*> ok]       <- template groups
//! ```
//!
//! Id 0 is reserved for the `None` word that stands in for an empty
//! execution window.

use std::collections::BTreeMap;
use std::fmt;

/// Placeholder token for a variable position.
pub const WILDCARD: &str = "<*>";

/// Word used for execution windows that produced no log output.
pub const NONE_WORD: &str = "None";

/// Dense identifier of a learned log template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateId(pub u32);

impl TemplateId {
    /// Reserved id of the `None` word.
    pub const NONE: TemplateId = TemplateId(0);
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Tuning knobs of the template tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateConfig {
    /// Tree depth including the root, the token-count layer and the leaf
    /// layer; `depth - 3` leading tokens are used for routing.
    pub depth: usize,
    /// Fraction of equal-position tokens required to join a group.
    pub similarity_threshold: f64,
    /// Maximum number of children of a routing node.
    pub max_children: usize,
    /// Wildcard digit-bearing tokens before routing.
    pub mask_digits: bool,
}

impl Default for TemplateConfig {
    fn default() -> Self {
        Self {
            depth: 4,
            similarity_threshold: 0.4,
            max_children: 100,
            mask_digits: true,
        }
    }
}

/// A learned template: constant tokens plus wildcard slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub id: TemplateId,
    pub tokens: Vec<String>,
    /// Number of log lines matched so far.
    pub matched: u64,
}

impl Template {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Default, Clone)]
struct Node {
    children: BTreeMap<String, Node>,
    groups: Vec<TemplateId>,
}

/// The online template miner.
#[derive(Debug, Clone)]
pub struct TemplateTree {
    config: TemplateConfig,
    buckets: BTreeMap<usize, Node>,
    templates: BTreeMap<TemplateId, Template>,
    next_id: u32,
}

impl Default for TemplateTree {
    fn default() -> Self {
        Self::new(TemplateConfig::default())
    }
}

impl TemplateTree {
    pub fn new(config: TemplateConfig) -> Self {
        let config = TemplateConfig {
            depth: config.depth.max(3),
            similarity_threshold: config.similarity_threshold.clamp(f64::MIN_POSITIVE, 1.0),
            max_children: config.max_children.max(2),
            ..config
        };
        Self {
            config,
            buckets: BTreeMap::new(),
            templates: BTreeMap::new(),
            next_id: 1,
        }
    }

    pub fn config(&self) -> &TemplateConfig {
        &self.config
    }

    /// Classifies one log line, learning or generalizing a template as
    /// needed, and returns its id.
    ///
    /// A line consisting only of whitespace is treated like the `None` word.
    pub fn ingest(&mut self, message: &str) -> TemplateId {
        let raw: Vec<&str> = message.split_whitespace().collect();
        if raw.is_empty() || raw == [NONE_WORD] {
            return self.none_id();
        }
        let tokens: Vec<String> = raw
            .iter()
            .map(|t| {
                if self.config.mask_digits {
                    mask_token(t)
                } else {
                    (*t).to_string()
                }
            })
            .collect();

        let prefix_len = (self.config.depth - 3).min(tokens.len());
        let max_children = self.config.max_children;
        let mut node = self.buckets.entry(tokens.len()).or_default();
        for token in &tokens[..prefix_len] {
            node = descend(node, token, max_children);
        }

        let threshold = self.config.similarity_threshold;
        let mut best: Option<(TemplateId, f64)> = None;
        for &id in &node.groups {
            let sim = similarity(&self.templates[&id].tokens, &tokens);
            if best.is_none_or(|(_, s)| sim > s) {
                best = Some((id, sim));
            }
        }

        match best {
            Some((id, sim)) if sim >= threshold => {
                let template = self
                    .templates
                    .get_mut(&id)
                    .expect("group points at template");
                for (slot, token) in template.tokens.iter_mut().zip(&tokens) {
                    if slot != token {
                        *slot = generalize(slot, token);
                    }
                }
                template.matched += 1;
                id
            }
            _ => {
                let id = TemplateId(self.next_id);
                self.next_id += 1;
                node.groups.push(id);
                self.templates.insert(
                    id,
                    Template {
                        id,
                        tokens,
                        matched: 1,
                    },
                );
                id
            }
        }
    }

    fn none_id(&mut self) -> TemplateId {
        self.templates
            .entry(TemplateId::NONE)
            .or_insert_with(|| Template {
                id: TemplateId::NONE,
                tokens: vec![NONE_WORD.to_string()],
                matched: 0,
            })
            .matched += 1;
        TemplateId::NONE
    }

    /// Number of distinct ids issued so far, including the reserved `None`
    /// id once it has been used.
    pub fn template_count(&self) -> usize {
        self.templates.len()
    }

    pub fn template(&self, id: TemplateId) -> Option<&Template> {
        self.templates.get(&id)
    }

    /// Templates in id order.
    pub fn templates(&self) -> impl Iterator<Item = &Template> {
        self.templates.values()
    }

    /// Line-oriented export: `<id>\t<space-joined tokens>` per template.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for t in self.templates.values() {
            out.push_str(&format!("{}\t{}\n", t.id, t.text()));
        }
        out
    }
}

fn descend<'a>(node: &'a mut Node, token: &str, max_children: usize) -> &'a mut Node {
    let key = if has_digit(token) || token.contains(WILDCARD) {
        WILDCARD
    } else {
        token
    };
    if node.children.contains_key(key) {
        return node.children.get_mut(key).expect("checked");
    }
    // Overflowing nodes funnel new tokens into a shared wildcard child.
    let has_wild = node.children.contains_key(WILDCARD);
    let key = if has_wild {
        if node.children.len() < max_children {
            key
        } else {
            WILDCARD
        }
    } else if node.children.len() + 1 < max_children {
        key
    } else {
        WILDCARD
    };
    node.children.entry(key.to_string()).or_default()
}

/// Fraction of positions holding identical tokens.
fn similarity(template: &[String], tokens: &[String]) -> f64 {
    debug_assert_eq!(template.len(), tokens.len());
    let equal = template.iter().zip(tokens).filter(|(a, b)| a == b).count();
    equal as f64 / tokens.len() as f64
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

/// `key=` prefix of a `key=value` token, when the key is digit-free.
fn key_prefix(token: &str) -> Option<&str> {
    let eq = token.find('=')?;
    (eq > 0 && !has_digit(&token[..eq])).then(|| &token[..=eq])
}

fn mask_token(token: &str) -> String {
    if !has_digit(token) {
        return token.to_string();
    }
    match key_prefix(token) {
        Some(key) => format!("{key}{WILDCARD}"),
        None => WILDCARD.to_string(),
    }
}

fn generalize(current: &str, incoming: &str) -> String {
    match (key_prefix(current), key_prefix(incoming)) {
        (Some(a), Some(b)) if a == b => format!("{a}{WILDCARD}"),
        _ => WILDCARD.to_string(),
    }
}
