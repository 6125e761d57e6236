use std::sync::LazyLock;

use regex::Regex;

use super::{ReportSection, SectionKind};

/// Result of splitting an LLM reply into report sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSections {
    pub sections: Vec<ReportSection>,
    /// True when the reply was stored verbatim or some sections were missing.
    pub warning: bool,
}

/// Numbered heading line, e.g. `1. Overview`, `**2) Symptoms:**`, `### (3) Treatment`.
static HEADING: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[ \t]*(?:#{1,6}[ \t]*)?(?:\*\*|__)?[ \t]*\(?([1-4])[.):](?:[ \t]+|$)(.*)$").expect("valid regex")
});

fn keywords(kind: SectionKind) -> &'static [&'static str] {
    match kind {
        SectionKind::Overview => &["overview", "characteristic", "appearance", "description"],
        SectionKind::SymptomsToMonitor => &["symptom", "monitor"],
        SectionKind::TreatmentOptions => &["treatment", "management", "therap"],
        SectionKind::UrgentWarningSigns => &["urgent", "warning", "red flag", "immediate"],
    }
}

struct Candidate<'a> {
    kind: SectionKind,
    /// Byte offsets of the heading line.
    start: usize,
    end: usize,
    title: &'a str,
}

/// Splits `raw` on numbered headings `1.` to `4.`.
///
/// Headings must appear in increasing order. Candidates whose title names
/// the section (for example "Treatment options") are preferred, so numbered
/// lists inside a section body are not mistaken for headings. Fewer than two
/// recognized headings means the text is kept verbatim as a single overview.
pub fn parse_sections(raw: &str) -> ParsedSections {
    let candidates: Vec<Candidate<'_>> = HEADING
        .captures_iter(raw)
        .filter_map(|c| {
            let whole = c.get(0)?;
            let n: usize = c[1].parse().ok()?;
            Some(Candidate {
                kind: SectionKind::from_number(n)?,
                start: whole.start(),
                end: whole.end(),
                title: c.get(2).map_or("", |m| m.as_str()),
            })
        })
        .collect();

    let named = select(&candidates, true);
    let chosen = if named.len() >= 2 {
        named
    } else {
        select(&candidates, false)
    };
    if chosen.len() < 2 {
        return ParsedSections {
            sections: vec![ReportSection {
                kind: SectionKind::Overview,
                heading: SectionKind::Overview.heading().to_string(),
                body: raw.trim().to_string(),
            }],
            warning: true,
        };
    }

    let mut sections = Vec::with_capacity(chosen.len());
    for (i, c) in chosen.iter().enumerate() {
        let body_end = chosen.get(i + 1).map_or(raw.len(), |next| next.start);
        let (heading, inline) = split_title(c.title);
        let mut body = raw[c.end..body_end].trim().to_string();
        if !inline.is_empty() {
            body = if body.is_empty() {
                inline.to_string()
            } else {
                format!("{inline}\n{body}")
            };
        }
        sections.push(ReportSection {
            kind: c.kind,
            heading: if heading.is_empty() {
                c.kind.heading().to_string()
            } else {
                heading.to_string()
            },
            body,
        });
    }
    let warning = sections.len() < SectionKind::ALL.len();
    ParsedSections { sections, warning }
}

fn select<'c, 'a>(candidates: &'c [Candidate<'a>], require_keyword: bool) -> Vec<&'c Candidate<'a>> {
    let mut chosen: Vec<&Candidate<'a>> = Vec::new();
    for c in candidates {
        if chosen.last().is_some_and(|last| c.kind <= last.kind) {
            continue;
        }
        if require_keyword {
            let title = c.title.to_lowercase();
            if !keywords(c.kind).iter().any(|k| title.contains(k)) {
                continue;
            }
        }
        chosen.push(c);
    }
    chosen
}

/// Splits a heading title into its label and any text after a colon.
fn split_title(title: &str) -> (&str, &str) {
    let cleaned = title.trim().trim_matches(|ch| ch == '*' || ch == '_' || ch == '#');
    match cleaned.split_once(':') {
        Some((head, rest)) => (
            head.trim().trim_end_matches(['*', '_']).trim(),
            rest.trim().trim_start_matches(['*', '_']).trim(),
        ),
        None => (cleaned.trim(), ""),
    }
}
