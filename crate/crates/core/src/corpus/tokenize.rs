/// Lowercases and splits on every run of non-alphanumeric characters.
///
/// Disfluency markers such as `#uh` come out as the bare word (`uh`).
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_and_lowercases() {
        assert_eq!(tokenize("Hi, good morning-"), ["hi", "good", "morning"]);
        assert_eq!(tokenize("#uh good afternoon."), ["uh", "good", "afternoon"]);
        assert_eq!(tokenize("This is #Um tour-guide 1"), ["this", "is", "um", "tour", "guide", "1"]);
        assert!(tokenize("  ...  ").is_empty());
    }
}
