use serde::{Deserialize, Serialize};

/// Line-width and indentation statistics over the non-empty lines of a document.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LayoutFeatures {
    pub width_min: f64,
    pub width_max: f64,
    pub width_mean: f64,
    pub width_median: f64,
    pub width_std: f64,
    pub width_var: f64,
    pub indent_min: f64,
    pub indent_max: f64,
    pub indent_mean: f64,
    pub indent_median: f64,
    pub indent_std: f64,
    pub indent_var: f64,
    pub nonempty_lines: u64,
    pub empty_lines: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Summary {
    min: f64,
    max: f64,
    mean: f64,
    median: f64,
    std: f64,
    var: f64,
}

/// Population statistics; an empty sample summarizes to all zeros.
fn summarize(values: &mut [f64]) -> Summary {
    if values.is_empty() {
        return Summary::default();
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    let std = var.sqrt();
    Summary {
        min: values[0],
        max: values[n - 1],
        mean,
        median,
        std,
        // keeps var == std^2 exactly
        var: std * std,
    }
}

/// Lines are split on `\n`; a trailing newline does not open a new line.
pub(crate) fn lines(text: &str) -> impl Iterator<Item = &str> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let empty = text.is_empty();
    body.split('\n').filter(move |_| !empty)
}

pub fn layout_features(raw_text: &str) -> LayoutFeatures {
    let mut widths = Vec::new();
    let mut indents = Vec::new();
    let mut empty = 0u64;
    for line in lines(raw_text) {
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            empty += 1;
            continue;
        }
        widths.push(trimmed.chars().count() as f64);
        indents.push(trimmed.chars().take_while(|c| c.is_whitespace()).count() as f64);
    }
    let w = summarize(&mut widths);
    let i = summarize(&mut indents);
    LayoutFeatures {
        width_min: w.min,
        width_max: w.max,
        width_mean: w.mean,
        width_median: w.median,
        width_std: w.std,
        width_var: w.var,
        indent_min: i.min,
        indent_max: i.max,
        indent_mean: i.mean,
        indent_median: i.median,
        indent_std: i.std,
        indent_var: i.var,
        nonempty_lines: widths.len() as u64,
        empty_lines: empty,
    }
}

impl LayoutFeatures {
    pub(crate) fn values(&self) -> [f64; 14] {
        [
            self.width_min,
            self.width_max,
            self.width_mean,
            self.width_median,
            self.width_std,
            self.width_var,
            self.indent_min,
            self.indent_max,
            self.indent_mean,
            self.indent_median,
            self.indent_std,
            self.indent_var,
            self.nonempty_lines as f64,
            self.empty_lines as f64,
        ]
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn two_lines_and_a_blank() {
        let f = layout_features("ab\n  cd\n\n");
        assert_eq!(f.width_min, 2.0);
        assert_eq!(f.width_max, 4.0);
        assert_eq!(f.width_mean, 3.0);
        assert_eq!(f.width_median, 3.0);
        assert_eq!(f.width_std, 1.0);
        assert_eq!(f.width_var, 1.0);
        assert_eq!(f.indent_min, 0.0);
        assert_eq!(f.indent_max, 2.0);
        assert_eq!(f.indent_mean, 1.0);
        assert_eq!(f.nonempty_lines, 2);
        assert_eq!(f.empty_lines, 1);
    }

    #[test]
    fn empty_text() {
        assert_eq!(layout_features(""), LayoutFeatures::default());
    }

    #[test]
    fn single_line() {
        let f = layout_features("xxxx");
        for v in [f.width_min, f.width_max, f.width_mean, f.width_median] {
            assert_eq!(v, 4.0);
        }
        assert_eq!(f.width_std, 0.0);
        assert_eq!(f.width_var, 0.0);
        assert_eq!(f.indent_max, 0.0);
        assert_eq!((f.nonempty_lines, f.empty_lines), (1, 0));
    }

    #[test]
    fn whitespace_only_lines_are_empty_and_tabs_count_once() {
        let f = layout_features(" \t \n\tab  ");
        assert_eq!((f.nonempty_lines, f.empty_lines), (1, 1));
        assert_eq!(f.width_max, 3.0);
        assert_eq!(f.indent_max, 1.0);
    }

    fn text_lines() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec("[ a-z\t]{0,12}", 0..12)
    }

    /// Every line newline-terminated, so the text has exactly `lines.len()` lines.
    fn terminated(lines: &[String]) -> String {
        lines.iter().map(|l| format!("{l}\n")).collect()
    }

    proptest! {
        #[test]
        fn order_free(lines in text_lines(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = lines.clone();
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            prop_assert_eq!(layout_features(&terminated(&lines)), layout_features(&terminated(&shuffled)));
        }

        #[test]
        fn appending_blank_line_only_bumps_empty_count(lines in text_lines()) {
            let text = terminated(&lines);
            let before = layout_features(&text);
            let after = layout_features(&format!("{text}\n"));
            prop_assert_eq!(after.empty_lines, before.empty_lines + 1);
            prop_assert_eq!(LayoutFeatures { empty_lines: before.empty_lines, ..after }, before);
        }

        #[test]
        fn invariants(lines in text_lines()) {
            let f = layout_features(&terminated(&lines));
            prop_assert!(f.width_min <= f.width_median && f.width_median <= f.width_max);
            prop_assert!(f.indent_min <= f.indent_median && f.indent_median <= f.indent_max);
            prop_assert!((f.width_var - f.width_std * f.width_std).abs() <= 1e-9);
            prop_assert!((f.indent_var - f.indent_std * f.indent_std).abs() <= 1e-9);
            prop_assert_eq!(f.nonempty_lines + f.empty_lines, lines.len() as u64);
        }
    }
}
