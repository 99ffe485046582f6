/// Minimum token length, counted in characters before stemming.
pub const MIN_TOKEN_LEN: usize = 3;

/// Splits text into lowercase alphabetic tokens.
///
/// Text is cut at every character that is neither a letter nor a digit.
/// Runs that contain a digit are discarded whole, so "2nd" and "b12" never
/// leave fragments behind. Surviving runs are lowercased and kept when they
/// are at least [`MIN_TOKEN_LEN`] characters long.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut has_digit = false;

    let mut flush = |current: &mut String, has_digit: &mut bool| {
        if !*has_digit && current.chars().count() >= MIN_TOKEN_LEN {
            tokens.push(std::mem::take(current));
        } else {
            current.clear();
        }
        *has_digit = false;
    };

    for c in text.chars() {
        if c.is_alphabetic() {
            // Lowercasing can emit combining marks (e.g. 'İ'); keep letters only.
            current.extend(c.to_lowercase().filter(|l| l.is_alphabetic()));
        } else if c.is_numeric() {
            has_digit = true;
        } else {
            flush(&mut current, &mut has_digit);
        }
    }
    flush(&mut current, &mut has_digit);
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_and_numbers() {
        assert_eq!(
            tokenize("The Coal-Seam, 2020!"),
            vec!["the", "coal", "seam"]
        );
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  \t\n ").is_empty());
    }

    #[test]
    fn length_filter_and_case() {
        assert_eq!(tokenize("ab AB abc ABC"), vec!["abc", "abc"]);
    }

    #[test]
    fn mixed_alphanumeric_runs_are_dropped() {
        assert_eq!(tokenize("2nd seam b12 drill"), vec!["seam", "drill"]);
    }

    #[test]
    fn unicode_letters_are_kept() {
        assert_eq!(tokenize("Ünterschied café"), vec!["ünterschied", "café"]);
    }
}
