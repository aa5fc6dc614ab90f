//! Maps byte offsets and dotted field paths back to source lines.

use std::collections::BTreeMap;

/// 1-based line containing byte `offset`.
pub fn line_of(text: &str, offset: usize) -> usize {
    let end = offset.min(text.len());
    text.as_bytes()[..end].iter().filter(|&&b| b == b'\n').count() + 1
}

type Path = Vec<(String, Option<usize>)>;

fn parse_path(path: &str) -> Path {
    path.split('.')
        .map(|seg| match seg.split_once('[') {
            Some((name, rest)) => (name.to_string(), rest.trim_end_matches(']').parse().ok()),
            None => (seg.to_string(), None),
        })
        .collect()
}

fn unquote(key: &str) -> String {
    key.trim().trim_matches('"').trim_matches('\'').to_string()
}

fn split_key(key: &str) -> Vec<String> {
    key.split('.').map(unquote).collect()
}

fn matches(candidate: &Path, target: &Path) -> bool {
    candidate.len() == target.len()
        && candidate.iter().zip(target).enumerate().all(|(k, ((cn, ci), (tn, ti)))| {
            cn == tn
                && match (ci, ti) {
                    (_, None) => true,
                    (Some(a), Some(b)) => a == b,
                    (None, Some(_)) => k + 1 == target.len(),
                }
        })
}

/// Line of the key or table header that best matches `field`, a dotted
/// path such as `jobs[1].duty_cycle`. Falls back to the closest enclosing
/// table when the key itself is absent.
pub fn field_line(text: &str, field: &str) -> Option<usize> {
    let mut entries: Vec<(Path, usize)> = Vec::new();
    let mut table: Path = Vec::new();
    let mut array_index: BTreeMap<String, usize> = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("[[") {
            let name = rest.split("]]").next().unwrap_or("");
            let parts = split_key(name);
            let full = parts.join(".");
            let idx = *array_index.entry(full).and_modify(|i| *i += 1).or_insert(0);
            let mut path = annotate(&parts[..parts.len() - 1], &array_index);
            path.push((parts[parts.len() - 1].clone(), Some(idx)));
            table = path;
            entries.push((table.clone(), n + 1));
        } else if let Some(rest) = line.strip_prefix('[') {
            let name = rest.split(']').next().unwrap_or("");
            table = annotate(&split_key(name), &array_index);
            entries.push((table.clone(), n + 1));
        } else if let Some((key, _)) = line.split_once('=') {
            let mut path = table.clone();
            path.extend(split_key(key).into_iter().map(|k| (k, None)));
            entries.push((path, n + 1));
        }
    }
    let mut target = parse_path(field);
    while !target.is_empty() {
        if let Some((_, line)) = entries.iter().find(|(p, _)| matches(p, &target)) {
            return Some(*line);
        }
        target.pop();
    }
    None
}

/// Attaches the current element index to every prefix that names an array
/// of tables.
fn annotate(parts: &[String], arrays: &BTreeMap<String, usize>) -> Path {
    let mut out = Vec::with_capacity(parts.len());
    for k in 0..parts.len() {
        let prefix = parts[..=k].join(".");
        out.push((parts[k].clone(), arrays.get(&prefix).copied()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = "seed = 1\n[cc]\nalgorithm = \"reno\"\n[[jobs]]\nperiod = 1\n[[jobs]]\nperiod = 2\nduty_cycle = 3\n[jobs.aggressiveness]\nslope = 1\n[metrics]\nlinks = [\"a->b\"]\n";

    #[test]
    fn finds_keys_in_arrays_of_tables() {
        assert_eq!(field_line(TEXT, "jobs[1].duty_cycle"), Some(8));
        assert_eq!(field_line(TEXT, "jobs[0].period"), Some(5));
        assert_eq!(field_line(TEXT, "jobs[1].aggressiveness"), Some(9));
        assert_eq!(field_line(TEXT, "jobs[1].aggressiveness.slope"), Some(10));
    }

    #[test]
    fn falls_back_to_enclosing_table() {
        assert_eq!(field_line(TEXT, "jobs[0].duty_cycle"), Some(4));
        assert_eq!(field_line(TEXT, "cc.init_cwnd"), Some(2));
        assert_eq!(field_line(TEXT, "metrics.links[0]"), Some(12));
        assert_eq!(field_line(TEXT, "topology.pairs"), None);
    }

    #[test]
    fn offsets_to_lines() {
        assert_eq!(line_of("a\nb\nc", 0), 1);
        assert_eq!(line_of("a\nb\nc", 2), 2);
        assert_eq!(line_of("a\nb\nc", 100), 3);
    }
}
