//! Deterministic lexicon-driven backend.
//!
//! Every judgment is a pure function of the input text and the loaded
//! lexicon, which makes the whole pipeline exactly reproducible and
//! testable. The decomposition grammar is intentionally shallow: subjects
//! are what comes before the first action, the environment is the object of
//! the last locative preposition, style cues are trailing comma segments
//! matching the style vocabulary, and everything else is trajectory text.

use async_trait::async_trait;

use crate::error::BackendError;
use crate::types::{ContextField, RiskVector, SafetyCategory, SceneContext, StaticFinding};

use super::lexicon::{EntryRole, Lexicon, LexiconEntry};
use super::matcher::{self, Token};
use super::{
    AnalyzerBackend, BackendStatus, ConstraintDirective, ConstraintRequest, RawDecomposition,
    RewriteRequest, TriggerDimension,
};

const LOCATIVE_PREPOSITIONS: [&str; 5] = ["in", "at", "on", "inside", "near"];

/// Common -ing nouns that the gerund heuristic must not treat as actions.
const GERUND_STOPLIST: [&str; 20] = [
    "anything", "building", "ceiling", "clothing", "dining", "dressing", "during", "evening",
    "everything", "lightning", "living", "morning", "nothing", "painting", "parking",
    "something", "spring", "string", "thing", "wedding",
];

const TONE_NOTE: &str = "maintain the original narrative tension and tone";

/// Deterministic analyzer backed by an immutable lexicon.
#[derive(Debug, Clone)]
pub struct RuleBackend {
    lexicon: Lexicon,
}

impl RuleBackend {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }

    /// Backend over the bundled default lexicon.
    pub fn bundled() -> Self {
        Self::new(Lexicon::bundled())
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }
}

/// Score one state against the lexicon.
///
/// Content is the max severity of action/static entries matching the state;
/// transition is the max severity over escalation pairs whose earlier stage
/// matches the previous state and later stage matches this one (0 when no
/// predecessor exists); prospective is the max severity of chain stages
/// reachable beyond the most advanced stage this state matches.
pub fn rule_score(state_text: &str, prev_text: Option<&str>, lexicon: &Lexicon) -> RiskVector {
    let tokens = matcher::tokenize(state_text);

    let content = lexicon
        .matches_in(&tokens, &[EntryRole::Action, EntryRole::StaticEntity])
        .iter()
        .map(|e| e.severity)
        .fold(0.0, f64::max);

    let transition = match prev_text {
        None => 0.0,
        Some(prev) => {
            let prev_tokens = matcher::tokenize(prev);
            lexicon
                .pairs()
                .iter()
                .filter(|p| {
                    matcher::find_phrase(&prev_tokens, &p.earlier).is_some()
                        && matcher::find_phrase(&tokens, &p.later).is_some()
                })
                .map(|p| p.severity)
                .fold(0.0, f64::max)
        }
    };

    let prospective = lexicon
        .chain_matches(&tokens)
        .iter()
        .map(|(chain_id, stage)| reachable_severity(lexicon, chain_id, stage.stage_index))
        .fold(0.0, f64::max);

    RiskVector::new(content, transition, prospective)
}

/// Max severity over stages of `chain_id` strictly after `stage_index`.
fn reachable_severity(lexicon: &Lexicon, chain_id: &str, stage_index: usize) -> f64 {
    lexicon
        .chains()
        .get(chain_id)
        .map(|stages| {
            stages
                .iter()
                .filter(|s| s.stage_index > stage_index)
                .map(|s| lexicon.entries[s.entry_index].severity)
                .fold(0.0, f64::max)
        })
        .unwrap_or(0.0)
}

fn category_directive(category: SafetyCategory) -> &'static str {
    match category {
        SafetyCategory::Pornography => "explicit sexual content must not be depicted",
        SafetyCategory::BorderlinePornography => "suggestive sexual framing must be avoided",
        SafetyCategory::Violence => "physical contact must be avoided",
        SafetyCategory::Gore => "graphic injury and blood must not be depicted",
        SafetyCategory::DisturbingContent => "shocking or horrifying imagery must be avoided",
        SafetyCategory::PublicFigures => {
            "real public figures must not be depicted in fabricated situations"
        }
        SafetyCategory::Discrimination => "demeaning portrayals of any group must be avoided",
        SafetyCategory::PoliticalSensitivity => "politically inflammatory framing must be avoided",
        SafetyCategory::Copyright => "protected characters and works must not be reproduced",
        SafetyCategory::IllegalActivities => "the depiction of criminal acts must be avoided",
        SafetyCategory::Misinformation => {
            "fabricated factual claims must not be presented as real"
        }
        SafetyCategory::SequentialAction => "the harmful action sequence must not be completed",
        SafetyCategory::DynamicVariation => {
            "the transformation toward unsafe content must be halted"
        }
        SafetyCategory::CoherentContextual => "the implied unsafe outcome must not materialize",
    }
}

fn intent_paraphrase(category: SafetyCategory) -> &'static str {
    match category {
        SafetyCategory::Pornography => "an expressive dance performance",
        SafetyCategory::BorderlinePornography => "a stylish portrait session",
        SafetyCategory::Violence => "a tense interpersonal confrontation",
        SafetyCategory::Gore => "a dramatic moment of physical peril",
        SafetyCategory::DisturbingContent => "a suspenseful dramatic scene",
        SafetyCategory::PublicFigures => "a satirical political sketch",
        SafetyCategory::Discrimination => "a lively comedy routine",
        SafetyCategory::PoliticalSensitivity => "a charged public demonstration",
        SafetyCategory::Copyright => "an animated character study",
        SafetyCategory::IllegalActivities => "a tense everyday errand",
        SafetyCategory::Misinformation => "a staged media production",
        SafetyCategory::SequentialAction => "a methodical step-by-step task",
        SafetyCategory::DynamicVariation => "a striking visual transformation",
        SafetyCategory::CoherentContextual => "an unfolding crowd scene",
    }
}

#[derive(Debug, Clone, Copy)]
struct Span {
    start: usize,
    end: usize,
}

impl Span {
    fn intersects(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

fn is_gerund(word: &str) -> bool {
    word.len() > 4 && word.ends_with("ing") && !GERUND_STOPLIST.contains(&word)
}

impl RuleBackend {
    /// Token spans matching any lexicon action pattern, plus bare gerunds.
    fn action_spans(&self, tokens: &[Token]) -> Vec<Span> {
        let mut spans = Vec::new();
        for entry in &self.lexicon.entries {
            if entry.role != EntryRole::Action {
                continue;
            }
            for (s, e) in matcher::find_all_phrases(tokens, &matcher::pattern_words(&entry.pattern))
            {
                spans.push(Span { start: s, end: e });
            }
        }
        for (i, t) in tokens.iter().enumerate() {
            if is_gerund(&t.word) {
                spans.push(Span { start: i, end: i + 1 });
            }
        }
        spans
    }

    fn decompose_sentence(&self, sentence: &str) -> SentenceParts {
        // Style cues: trailing comma segments matching the style vocabulary.
        let mut segments: Vec<&str> = sentence.split(',').map(str::trim).collect();
        let mut style_rev = Vec::new();
        while segments.len() > 1 {
            let last = segments.last().unwrap();
            let is_style = self
                .lexicon
                .entries
                .iter()
                .filter(|e| e.role == EntryRole::StyleCue)
                .any(|e| matcher::text_contains_phrase(last, &e.pattern));
            if !is_style {
                break;
            }
            style_rev.push(last.to_string());
            segments.pop();
        }
        let style: Vec<String> = style_rev.into_iter().rev().collect();
        let head = segments.join(", ");

        let tokens = matcher::tokenize(&head);
        let action_spans = self.action_spans(&tokens);
        let first_action_start = action_spans.iter().map(|s| s.start).min();

        // Prepositional phrases: preposition token up to the next preposition
        // or end of sentence.
        let prep_positions: Vec<usize> = tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| LOCATIVE_PREPOSITIONS.contains(&t.word.as_str()))
            .map(|(i, _)| i)
            .collect();
        let mut pps: Vec<Span> = Vec::new();
        for (n, &p) in prep_positions.iter().enumerate() {
            let end = prep_positions.get(n + 1).copied().unwrap_or(tokens.len());
            if end > p + 1 {
                pps.push(Span { start: p, end });
            }
        }
        let is_action_pp = |pp: &Span| action_spans.iter().any(|a| a.intersects(pp));
        let env_pp = pps.iter().rev().find(|pp| !is_action_pp(pp)).copied();
        let first_action_pp_start = pps.iter().filter(|pp| is_action_pp(pp)).map(|pp| pp.start).min();

        let subject_end = [
            first_action_start,
            env_pp.map(|pp| pp.start),
            first_action_pp_start,
        ]
        .into_iter()
        .flatten()
        .min()
        .unwrap_or(tokens.len());

        let subjects_text = if subject_end > 0 {
            matcher::span_text(&head, &tokens, 0, subject_end).to_string()
        } else {
            String::new()
        };
        let subjects: Vec<String> = subjects_text
            .split(" and ")
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();

        let environment = env_pp
            .filter(|pp| pp.end > pp.start + 1)
            .map(|pp| matcher::span_text(&head, &tokens, pp.start + 1, pp.end).to_string())
            .unwrap_or_default();

        // Trajectory tokens: everything after the subjects, minus the
        // environment phrase. A preposition introducing an action phrase is
        // dropped ("in a heated argument" -> "a heated argument"), but kept
        // when the action started before the phrase ("screaming in terror").
        let mut keep = vec![false; tokens.len()];
        for flag in keep.iter_mut().skip(subject_end) {
            *flag = true;
        }
        if let Some(pp) = env_pp {
            for flag in keep.iter_mut().take(pp.end).skip(pp.start) {
                *flag = false;
            }
        }
        for pp in pps.iter().filter(|pp| is_action_pp(pp)) {
            let action_inside_object = action_spans
                .iter()
                .any(|a| a.intersects(pp) && a.start > pp.start);
            let action_from_before = action_spans
                .iter()
                .any(|a| a.intersects(pp) && a.start <= pp.start);
            if action_inside_object && !action_from_before {
                keep[pp.start] = false;
            }
        }

        let mut fragments: Vec<String> = Vec::new();
        let mut run_start: Option<usize> = None;
        for i in 0..=tokens.len() {
            let kept = i < tokens.len() && keep[i];
            match (kept, run_start) {
                (true, None) => run_start = Some(i),
                (false, Some(s)) => {
                    fragments.push(matcher::span_text(&head, &tokens, s, i).to_string());
                    run_start = None;
                }
                _ => {}
            }
        }
        let trajectory_text = fragments.join(" ");

        SentenceParts {
            subjects,
            environment,
            style,
            trajectory_text,
        }
    }

    /// Dominant category of a state: category of the highest-severity
    /// matching entry, when any match carries positive severity.
    fn dominant_category(&self, text: &str) -> Option<SafetyCategory> {
        let tokens = matcher::tokenize(text);
        self.lexicon
            .matches_in(&tokens, &[EntryRole::Action, EntryRole::StaticEntity])
            .into_iter()
            .filter(|e| e.severity > 0.0)
            .max_by(|a, b| a.severity.total_cmp(&b.severity))
            .map(|e| e.category)
    }

    /// Best substitute for a state: the matching entry with a safe
    /// substitute, preferring longer patterns, then higher severity.
    fn substitute_for(&self, text: &str) -> Option<&LexiconEntry> {
        let tokens = matcher::tokenize(text);
        self.lexicon
            .matches_in(&tokens, &[EntryRole::Action, EntryRole::StaticEntity])
            .into_iter()
            .filter(|e| e.safe_substitute.is_some())
            .max_by(|a, b| {
                let la = matcher::pattern_words(&a.pattern).len();
                let lb = matcher::pattern_words(&b.pattern).len();
                la.cmp(&lb).then(a.severity.total_cmp(&b.severity))
            })
    }
}

struct SentenceParts {
    subjects: Vec<String>,
    environment: String,
    style: Vec<String>,
    trajectory_text: String,
}

/// Split trajectory text on temporal connectives into ordered state
/// descriptions.
fn split_states(text: &str) -> Vec<String> {
    const CONNECTIVES: [&str; 4] = [", and finally ", " and finally ", ", then ", " then "];
    let mut states = Vec::new();
    let mut rest = text;
    'outer: while !rest.is_empty() {
        let lower = rest.to_lowercase();
        let mut best: Option<(usize, usize)> = None;
        for c in CONNECTIVES {
            if let Some(pos) = lower.find(c) {
                if best.map_or(true, |(bp, _)| pos < bp) {
                    best = Some((pos, c.len()));
                }
            }
        }
        match best {
            Some((pos, len)) => {
                push_state(&rest[..pos], &mut states);
                rest = &rest[pos + len..];
            }
            None => {
                push_state(rest, &mut states);
                break 'outer;
            }
        }
    }
    states
}

fn push_state(raw: &str, out: &mut Vec<String>) {
    let mut s = raw.trim();
    for lead in ["then ", "Then ", "and finally ", "And finally ", "finally ", "Finally "] {
        if let Some(stripped) = s.strip_prefix(lead) {
            s = stripped.trim();
        }
    }
    let s = s.trim_matches(|c: char| c == ',' || c.is_whitespace());
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn capitalize_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

#[async_trait]
impl AnalyzerBackend for RuleBackend {
    async fn decompose_raw(&self, text: &str) -> Result<RawDecomposition, BackendError> {
        let sentences: Vec<&str> = text
            .split('.')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if sentences.is_empty() {
            return Err(BackendError::MalformedResponse(
                "no sentences to decompose".into(),
            ));
        }

        let first = self.decompose_sentence(sentences[0]);
        let mut states = split_states(&first.trajectory_text);
        for sentence in &sentences[1..] {
            states.extend(split_states(sentence));
        }
        if states.is_empty() {
            states.push("the scene holds still".to_string());
        }

        let intent = match self.dominant_category(&states[0]) {
            Some(category) => format!("depict {}", intent_paraphrase(category)),
            None => format!("depict {}", states[0].to_lowercase()),
        };

        Ok(RawDecomposition {
            subjects: first.subjects,
            environment: first.environment,
            style: first.style,
            states,
            intent,
        })
    }

    async fn scan_entities(
        &self,
        field: ContextField,
        text: &str,
    ) -> Result<Vec<StaticFinding>, BackendError> {
        let tokens = matcher::tokenize(text);
        let mut findings = Vec::new();
        for entry in &self.lexicon.entries {
            if entry.role != EntryRole::StaticEntity {
                continue;
            }
            for (s, e) in matcher::find_all_phrases(&tokens, &matcher::pattern_words(&entry.pattern))
            {
                findings.push((
                    tokens[s].start,
                    StaticFinding {
                        field,
                        matched_text: matcher::span_text(text, &tokens, s, e).to_string(),
                        category: entry.category,
                        severity: entry.severity,
                    },
                ));
            }
        }
        findings.sort_by_key(|(offset, _)| *offset);
        Ok(findings.into_iter().map(|(_, f)| f).collect())
    }

    async fn next_state(
        &self,
        previous: &str,
        _context: &SceneContext,
    ) -> Result<String, BackendError> {
        let tokens = matcher::tokenize(previous);
        // Follow the most dangerous active chain one stage forward.
        let next = self
            .lexicon
            .chain_matches(&tokens)
            .into_iter()
            .filter_map(|(chain_id, stage)| {
                let stages = &self.lexicon.chains()[chain_id];
                let pos = stages
                    .iter()
                    .position(|s| s.stage_index == stage.stage_index)?;
                let next_entry = self.lexicon.stage_entry(chain_id, pos + 1)?;
                Some((reachable_severity(&self.lexicon, chain_id, stage.stage_index), next_entry))
            })
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, e)| e.pattern.clone());
        if let Some(next) = next {
            return Ok(next);
        }
        // Neutral continuation when no chain applies.
        let trimmed = previous.trim();
        if trimmed.ends_with("continues") || trimmed == "the scene gradually settles" {
            Ok("the scene gradually settles".to_string())
        } else {
            Ok(format!("{trimmed} continues"))
        }
    }

    async fn score_risk(
        &self,
        state: &str,
        previous: Option<&str>,
        _context: &SceneContext,
    ) -> Result<RiskVector, BackendError> {
        Ok(rule_score(state, previous, &self.lexicon))
    }

    async fn constraint_text(
        &self,
        request: ConstraintRequest<'_>,
    ) -> Result<ConstraintDirective, BackendError> {
        let tokens = matcher::tokenize(request.flagged_state);
        let tau = request.tau;

        let content_hits: Vec<&LexiconEntry> = self
            .lexicon
            .matches_in(&tokens, &[EntryRole::Action, EntryRole::StaticEntity])
            .into_iter()
            .filter(|e| e.severity >= tau)
            .collect();

        let pair_hits: Vec<(SafetyCategory, f64)> = match request.previous_state {
            None => Vec::new(),
            Some(prev) => {
                let prev_tokens = matcher::tokenize(prev);
                self.lexicon
                    .pairs()
                    .iter()
                    .filter(|p| {
                        p.severity >= tau
                            && matcher::find_phrase(&prev_tokens, &p.earlier).is_some()
                            && matcher::find_phrase(&tokens, &p.later).is_some()
                    })
                    .map(|p| (p.category, p.severity))
                    .collect()
            }
        };

        // Chains whose remaining stages reach tau, with their terminal stage.
        let chain_hits: Vec<(SafetyCategory, f64, String)> = self
            .lexicon
            .chain_matches(&tokens)
            .into_iter()
            .filter_map(|(chain_id, stage)| {
                let reach = reachable_severity(&self.lexicon, chain_id, stage.stage_index);
                if reach < tau {
                    return None;
                }
                let stages = &self.lexicon.chains()[chain_id];
                let terminal = &self.lexicon.entries[stages.last().unwrap().entry_index];
                Some((terminal.category, reach, terminal.pattern.clone()))
            })
            .collect();

        let mut categories = std::collections::BTreeSet::new();
        categories.extend(content_hits.iter().map(|e| e.category));
        categories.extend(pair_hits.iter().map(|(c, _)| *c));
        categories.extend(chain_hits.iter().map(|(c, _, _)| *c));

        let neutralize = match request.dimension {
            TriggerDimension::Transition if !pair_hits.is_empty() => {
                let best = pair_hits
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                category_directive(best.0).to_string()
            }
            TriggerDimension::Prospective if !chain_hits.is_empty() => {
                let best = chain_hits
                    .iter()
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                format!("escalation toward '{}' must be averted", best.2)
            }
            _ if !content_hits.is_empty() => {
                let best = content_hits
                    .iter()
                    .max_by(|a, b| a.severity.total_cmp(&b.severity))
                    .unwrap();
                category_directive(best.category).to_string()
            }
            _ => {
                // Below-threshold fallback (e.g. static-forced trigger with
                // the localization stage disabled).
                let fallback = self.dominant_category(request.flagged_state);
                if let Some(cat) = fallback {
                    categories.insert(cat);
                    category_directive(cat).to_string()
                } else {
                    "the flagged content must be neutralized".to_string()
                }
            }
        };

        Ok(ConstraintDirective {
            neutralize,
            tone_note: TONE_NOTE.to_string(),
            categories,
        })
    }

    async fn rewrite_states(
        &self,
        request: RewriteRequest<'_>,
    ) -> Result<Vec<String>, BackendError> {
        let mut out = Vec::new();
        for (k, original) in request.states.iter().enumerate().skip(request.trigger_index) {
            let substitute = if request.attempt == 0 {
                self.substitute_for(original)
                    .and_then(|e| e.safe_substitute.clone())
            } else {
                None
            };
            out.push(substitute.unwrap_or_else(|| generic_closure(k - request.trigger_index)));
        }
        Ok(out)
    }

    async fn render_prompt(
        &self,
        context: &SceneContext,
        states: &[String],
    ) -> Result<String, BackendError> {
        if states.is_empty() {
            return Err(BackendError::MalformedResponse(
                "cannot render an empty trajectory".into(),
            ));
        }
        let mut prompt = String::new();
        let mut context_sentence = context.subjects.join(" and ");
        if !context.environment.is_empty() {
            if !context_sentence.is_empty() {
                context_sentence.push_str(" in ");
            } else {
                context_sentence.push_str("in ");
            }
            context_sentence.push_str(&context.environment);
        }
        for cue in &context.style {
            if !context_sentence.is_empty() {
                context_sentence.push_str(", ");
            }
            context_sentence.push_str(cue);
        }
        if !context_sentence.is_empty() {
            prompt.push_str(&context_sentence);
            prompt.push_str(". ");
        }

        prompt.push_str(&capitalize_first(&states[0]));
        for (i, state) in states.iter().enumerate().skip(1) {
            if i + 1 == states.len() {
                prompt.push_str(", and finally ");
            } else {
                prompt.push_str(", then ");
            }
            prompt.push_str(state);
        }
        prompt.push('.');
        Ok(prompt)
    }

    fn status(&self) -> BackendStatus {
        BackendStatus {
            kind: "rule".to_string(),
            ready: true,
            detail: self.lexicon.version.clone(),
        }
    }
}

/// Neutral de-escalation text for states without a lexicon substitute.
fn generic_closure(offset: usize) -> String {
    match offset % 3 {
        0 => "the scene settles into a calm pause".to_string(),
        1 => "the moment passes without incident".to_string(),
        _ => "everyone disperses quietly".to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backend() -> RuleBackend {
        RuleBackend::bundled()
    }

    #[tokio::test]
    async fn decomposes_the_parking_lot_prompt() {
        let d = backend()
            .decompose_raw("two men in a heated argument in a parking lot")
            .await
            .unwrap();
        assert_eq!(d.subjects, vec!["two men"]);
        assert_eq!(d.environment, "a parking lot");
        assert!(d.style.is_empty());
        assert_eq!(d.states, vec!["a heated argument"]);
        assert_eq!(d.intent, "depict a tense interpersonal confrontation");
    }

    #[tokio::test]
    async fn decomposes_the_cat_prompt_with_style() {
        let d = backend()
            .decompose_raw("a cat sleeping on a windowsill, golden-hour lighting")
            .await
            .unwrap();
        assert_eq!(d.subjects, vec!["a cat"]);
        assert_eq!(d.environment, "a windowsill");
        assert_eq!(d.style, vec!["golden-hour lighting"]);
        assert_eq!(d.states, vec!["sleeping"]);
    }

    #[tokio::test]
    async fn keeps_preposition_when_action_starts_before_it() {
        let d = backend()
            .decompose_raw("a patient screaming in terror in a hospital ward")
            .await
            .unwrap();
        assert_eq!(d.subjects, vec!["a patient"]);
        assert_eq!(d.environment, "a hospital ward");
        assert_eq!(d.states, vec!["screaming in terror"]);
    }

    #[tokio::test]
    async fn recovers_states_from_an_assembled_prompt() {
        let d = backend()
            .decompose_raw(
                "two men in a parking lot. A heated verbal exchange, then an intense verbal \
                 standoff at arm's length, and finally both men step back, exchange a final \
                 glare, and walk off",
            )
            .await
            .unwrap();
        assert_eq!(d.subjects, vec!["two men"]);
        assert_eq!(d.environment, "a parking lot");
        assert_eq!(d.states.len(), 3);
        assert_eq!(d.states[0], "A heated verbal exchange");
        assert_eq!(d.states[1], "an intense verbal standoff at arm's length");
        assert_eq!(d.states[2], "both men step back, exchange a final glare, and walk off");
    }

    #[test]
    fn rule_score_matches_the_lexicon() {
        let lex = Lexicon::bundled();
        let v = rule_score("physical fight", Some("shoving"), &lex);
        assert_eq!(v.content, 0.9);
        let v = rule_score("shoving", Some("heated verbal argument"), &lex);
        assert_eq!(v.content, 0.3);
        assert_eq!(v.transition, 0.6);
        let v = rule_score("sleeping", None, &lex);
        assert_eq!(v, RiskVector::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn prospective_reaches_the_chain_terminal() {
        let lex = Lexicon::bundled();
        let v = rule_score("a heated argument", None, &lex);
        assert_eq!(v.prospective, 0.9);
        // Terminal stage: nothing left to reach.
        let v = rule_score("physical fight", None, &lex);
        assert_eq!(v.prospective, 0.0);
        assert_eq!(v.content, 0.9);
    }

    #[tokio::test]
    async fn rollout_follows_the_escalation_chain() {
        let b = backend();
        let ctx = SceneContext::default();
        let s1 = b.next_state("a heated argument", &ctx).await.unwrap();
        assert_eq!(s1, "shoving");
        let s2 = b.next_state(&s1, &ctx).await.unwrap();
        assert_eq!(s2, "physical fight");
    }

    #[tokio::test]
    async fn neutral_continuation_for_benign_chain() {
        let b = backend();
        let ctx = SceneContext::default();
        let s1 = b.next_state("sleeping", &ctx).await.unwrap();
        assert_eq!(s1, "continues sleeping");
        let s2 = b.next_state(&s1, &ctx).await.unwrap();
        assert_eq!(s2, "stirs and stretches");
    }

    #[tokio::test]
    async fn static_scan_finds_entities_with_matched_text() {
        let b = backend();
        let findings = b
            .scan_entities(ContextField::Subject, "a man holding a bloody knife")
            .await
            .unwrap();
        assert_eq!(findings.len(), 1);
        assert_eq!(findings[0].matched_text, "bloody knife");
        assert_eq!(findings[0].category, SafetyCategory::Violence);
        assert_eq!(findings[0].severity, 0.9);

        let clean = b
            .scan_entities(ContextField::Environment, "windowsill")
            .await
            .unwrap();
        assert!(clean.is_empty());
    }

    #[tokio::test]
    async fn transition_trigger_yields_the_paper_directive() {
        let b = backend();
        let ctx = SceneContext::default();
        let directive = b
            .constraint_text(ConstraintRequest {
                flagged_state: "shoving",
                previous_state: Some("a heated argument"),
                dimension: TriggerDimension::Transition,
                context: &ctx,
                intent: "depict a tense interpersonal confrontation",
                tau: 0.5,
            })
            .await
            .unwrap();
        assert_eq!(directive.neutralize, "physical contact must be avoided");
        assert!(directive.categories.contains(&SafetyCategory::Violence));
    }

    #[tokio::test]
    async fn prospective_trigger_names_the_terminal_state() {
        let b = backend();
        let ctx = SceneContext::default();
        let directive = b
            .constraint_text(ConstraintRequest {
                flagged_state: "a heated argument",
                previous_state: None,
                dimension: TriggerDimension::Prospective,
                context: &ctx,
                intent: "depict a tense interpersonal confrontation",
                tau: 0.5,
            })
            .await
            .unwrap();
        assert_eq!(
            directive.neutralize,
            "escalation toward 'physical fight' must be averted"
        );
    }

    #[tokio::test]
    async fn rewrite_substitutes_chain_stages() {
        let b = backend();
        let ctx = SceneContext::default();
        let states = vec![
            "a heated argument".to_string(),
            "shoving".to_string(),
            "physical fight".to_string(),
        ];
        let rewritten = b
            .rewrite_states(RewriteRequest {
                states: &states,
                trigger_index: 1,
                neutralize: "physical contact must be avoided",
                context: &ctx,
                intent: "depict a tense interpersonal confrontation",
                attempt: 0,
            })
            .await
            .unwrap();
        assert_eq!(
            rewritten,
            vec![
                "an intense verbal standoff at arm's length".to_string(),
                "both men step back, exchange a final glare, and walk off".to_string(),
            ]
        );
    }

    #[tokio::test]
    async fn render_uses_the_fixed_template() {
        let b = backend();
        let ctx = SceneContext {
            subjects: vec!["two men".into()],
            environment: "a parking lot".into(),
            style: vec![],
        };
        let states = vec![
            "a heated verbal exchange".to_string(),
            "an intense verbal standoff at arm's length".to_string(),
            "both men step back, exchange a final glare, and walk off".to_string(),
        ];
        let prompt = b.render_prompt(&ctx, &states).await.unwrap();
        assert_eq!(
            prompt,
            "two men in a parking lot. A heated verbal exchange, then an intense verbal \
             standoff at arm's length, and finally both men step back, exchange a final \
             glare, and walk off."
        );
    }

    #[tokio::test]
    async fn render_omits_empty_optional_clauses() {
        let b = backend();
        let ctx = SceneContext {
            subjects: vec!["a cat".into()],
            environment: String::new(),
            style: vec![],
        };
        let prompt = b
            .render_prompt(&ctx, &["sleeping".to_string()])
            .await
            .unwrap();
        assert_eq!(prompt, "a cat. Sleeping.");
    }
}
