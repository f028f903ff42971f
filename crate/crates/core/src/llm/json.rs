//! Lenient extraction of a JSON payload from model output.

use serde::de::DeserializeOwned;

/// Parses the first JSON array or object found in `text`, ignoring code
/// fences and surrounding prose. A lone object is accepted where an array
/// is expected and wrapped into a one-element vector.
pub fn parse_json_list<T: DeserializeOwned>(text: &str) -> Option<Vec<T>> {
    let value = find_json(text)?;
    match value {
        serde_json::Value::Array(_) => serde_json::from_value(value).ok(),
        serde_json::Value::Object(ref map) => {
            // {"claims": [...]} style wrappers
            if map.len() == 1 {
                if let Some(inner @ serde_json::Value::Array(_)) = map.values().next() {
                    return serde_json::from_value(inner.clone()).ok();
                }
            }
            serde_json::from_value::<T>(value).ok().map(|v| vec![v])
        }
        _ => None,
    }
}

fn find_json(text: &str) -> Option<serde_json::Value> {
    let trimmed = strip_fences(text.trim());
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Some(v);
    }
    for (start, c) in trimmed.char_indices() {
        if c != '[' && c != '{' {
            continue;
        }
        let mut stream = serde_json::Deserializer::from_str(&trimmed[start..]).into_iter::<serde_json::Value>();
        if let Some(Ok(v)) = stream.next() {
            return Some(v);
        }
    }
    None
}

fn strip_fences(text: &str) -> &str {
    let Some(rest) = text.strip_prefix("```") else { return text };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphanumeric());
    rest.trim().strip_suffix("```").unwrap_or(rest).trim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Deserialize, PartialEq)]
    struct Item {
        a: u32,
    }

    #[test]
    fn plain_and_fenced() {
        assert_eq!(parse_json_list::<Item>("[{\"a\":1}]"), Some(vec![Item { a: 1 }]));
        assert_eq!(parse_json_list::<Item>("```json\n[{\"a\":2}]\n```"), Some(vec![Item { a: 2 }]));
    }

    #[test]
    fn embedded_in_prose() {
        assert_eq!(parse_json_list::<Item>("Here you go: [{\"a\":3}] hope that helps"), Some(vec![Item { a: 3 }]));
    }

    #[test]
    fn singleton_and_wrapper() {
        assert_eq!(parse_json_list::<Item>("{\"a\":4}"), Some(vec![Item { a: 4 }]));
        assert_eq!(parse_json_list::<Item>("{\"items\":[{\"a\":5}]}"), Some(vec![Item { a: 5 }]));
    }

    #[test]
    fn prose_is_rejected() {
        assert_eq!(parse_json_list::<Item>("I could not find any claims."), None);
        assert_eq!(parse_json_list::<Item>("[]"), Some(vec![]));
    }
}
