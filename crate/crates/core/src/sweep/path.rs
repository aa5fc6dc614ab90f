/// Why a dotted override path could not be applied.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("empty path segment")]
    EmptySegment,
    #[error("`{0}` is not a table")]
    NotTable(String),
    #[error("`{0}` is not an array")]
    NotArray(String),
    #[error("index {index} is out of range for `{at}` of length {len}")]
    OutOfRange { at: String, index: usize, len: usize },
}

/// Sets the value at a dotted `path` inside `table`, creating intermediate
/// tables as needed. A `*` segment applies the rest of the path to every
/// element of an array; a numeric segment selects one element.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), PathError> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(PathError::EmptySegment);
    }
    set_in_table(table, &segments, 0, value)
}

fn prefix(segments: &[&str], end: usize) -> String {
    segments[..end].join(".")
}

fn set_in_table(table: &mut toml::Table, seg: &[&str], i: usize, value: toml::Value) -> Result<(), PathError> {
    let key = seg[i];
    if i + 1 == seg.len() {
        table.insert(key.to_string(), value);
        return Ok(());
    }
    let next = seg[i + 1];
    let needs_array = next == "*" || next.parse::<usize>().is_ok();
    let child = table.entry(key.to_string()).or_insert_with(|| {
        if needs_array {
            toml::Value::Array(Vec::new())
        } else {
            toml::Value::Table(toml::Table::new())
        }
    });
    set_in_value(child, seg, i + 1, value)
}

fn set_in_value(node: &mut toml::Value, seg: &[&str], i: usize, value: toml::Value) -> Result<(), PathError> {
    let key = seg[i];
    if key == "*" || key.parse::<usize>().is_ok() {
        let toml::Value::Array(items) = node else { return Err(PathError::NotArray(prefix(seg, i))) };
        let targets: Vec<usize> = if key == "*" {
            (0..items.len()).collect()
        } else {
            let index: usize = key.parse().expect("checked numeric");
            if index >= items.len() {
                return Err(PathError::OutOfRange { at: prefix(seg, i), index, len: items.len() });
            }
            vec![index]
        };
        for t in targets {
            if i + 1 == seg.len() {
                items[t] = value.clone();
            } else {
                set_in_value(&mut items[t], seg, i + 1, value.clone())?;
            }
        }
        return Ok(());
    }
    let toml::Value::Table(t) = node else { return Err(PathError::NotTable(prefix(seg, i))) };
    set_in_table(t, seg, i, value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> toml::Table {
        toml::from_str(s).unwrap()
    }

    #[test]
    fn sets_nested_keys_and_creates_tables() {
        let mut t = table("a = 1");
        set_path(&mut t, "b.c.d", 2.into()).unwrap();
        set_path(&mut t, "a", 3.into()).unwrap();
        assert_eq!(t, table("a = 3\n[b.c]\nd = 2"));
    }

    #[test]
    fn wildcard_and_index() {
        let mut t = table("[[jobs]]\nx = 1\n[[jobs]]\nx = 2");
        set_path(&mut t, "jobs.*.y", 5.into()).unwrap();
        set_path(&mut t, "jobs.1.x", 9.into()).unwrap();
        assert_eq!(t, table("[[jobs]]\nx = 1\ny = 5\n[[jobs]]\nx = 9\ny = 5"));
    }

    #[test]
    fn errors() {
        let mut t = table("a = 1\nv = [1]");
        assert_eq!(set_path(&mut t, "a.b", 1.into()), Err(PathError::NotTable("a".into())));
        assert_eq!(set_path(&mut t, "a..b", 1.into()), Err(PathError::EmptySegment));
        assert_eq!(
            set_path(&mut t, "v.3", 1.into()),
            Err(PathError::OutOfRange { at: "v".into(), index: 3, len: 1 })
        );
    }
}
