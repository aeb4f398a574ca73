//! Single-pass `{placeholder}` substitution for the shipped prompt assets.

/// Fills `{name}` slots in `template` with the matching value.
///
/// The template is scanned once, left to right. Substituted values are
/// copied verbatim and never rescanned, so braces inside a value survive
/// literally. Slots with no matching name are left untouched.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let extra: usize = slots.iter().map(|(_, v)| v.len()).sum();
    let mut out = String::with_capacity(template.len() + extra);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let matched = after.find('}').and_then(|close| {
            let name = &after[..close];
            slots
                .iter()
                .find(|(slot, _)| *slot == name)
                .map(|(_, value)| (close, *value))
        });
        match matched {
            Some((close, value)) => {
                out.push_str(value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fills_every_occurrence() {
        assert_eq!(fill("{a}-{b}-{a}", &[("a", "1"), ("b", "2")]), "1-2-1");
    }

    #[test]
    fn values_are_not_rescanned() {
        let out = fill("x={x} y={y}", &[("x", "{y}"), ("y", "Y")]);
        assert_eq!(out, "x={y} y=Y");
    }

    #[test]
    fn unknown_and_unbalanced_braces_survive() {
        assert_eq!(fill("{nope} {a", &[("a", "1")]), "{nope} {a");
        assert_eq!(fill("}{", &[]), "}{");
    }
}
