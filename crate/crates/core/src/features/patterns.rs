//! Regex detection of pattern-specific items and their relative weights.

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Image,
    CreditCard,
    IpAddress,
    Email,
    Url,
    BitcoinAddress,
}

impl ItemKind {
    pub const ALL: [ItemKind; 6] = [
        ItemKind::Image,
        ItemKind::CreditCard,
        ItemKind::IpAddress,
        ItemKind::Email,
        ItemKind::Url,
        ItemKind::BitcoinAddress,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ItemKind::Image => "image",
            ItemKind::CreditCard => "credit_card",
            ItemKind::IpAddress => "ip_address",
            ItemKind::Email => "email",
            ItemKind::Url => "url",
            ItemKind::BitcoinAddress => "bitcoin_address",
        }
    }

    fn regex(self) -> &'static Regex {
        match self {
            ItemKind::Image => &IMAGE_RE,
            ItemKind::CreditCard => &CARD_RE,
            ItemKind::IpAddress => &IP_RE,
            ItemKind::Email => &EMAIL_RE,
            ItemKind::Url => &URL_RE,
            ItemKind::BitcoinAddress => &BTC_RE,
        }
    }
}

// Alternatives are ordered so that leftmost-first matching returns the
// longest candidate at each position.

static EMAIL_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}").unwrap());

static IP_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r"\b(?:(?:25[0-5]|2[0-4][0-9]|1[0-9][0-9]|[1-9]?[0-9])\.){3}(?:25[0-5]|2[0-4][0-9]|1[0-9][0-9]|[1-9]?[0-9])\b",
    )
    .unwrap()
});

static URL_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(
        r#"(?:https?|ftp)://[^\s<>"]+|\b[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.onion\b(?:/[^\s<>"]*)?"#,
    )
    .unwrap()
});

static BTC_RE: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"[13][a-km-zA-HJ-NP-Z1-9]{25,34}|bc1[02-9ac-hj-np-z]{11,71}").unwrap()
});

static CARD_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"\b[0-9](?:[ -]?[0-9]){12,18}\b").unwrap());

static IMAGE_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"(?i)<img\b[^>]*>?|\.(?:jpeg|jpg|png|gif|bmp|webp)\b").unwrap());

pub(crate) fn luhn_valid(digits: &[u32]) -> bool {
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| {
            if i % 2 == 1 {
                let dd = d * 2;
                if dd > 9 {
                    dd - 9
                } else {
                    dd
                }
            } else {
                d
            }
        })
        .sum();
    sum.is_multiple_of(10)
}

/// All non-overlapping matches of one item kind, scanned left to right.
pub fn find_items(kind: ItemKind, text: &str) -> Vec<&str> {
    let matches = kind.regex().find_iter(text).map(|m| m.as_str());
    match kind {
        ItemKind::CreditCard => matches
            .filter(|m| {
                let digits: Vec<u32> = m.chars().filter_map(|c| c.to_digit(10)).collect();
                luhn_valid(&digits)
            })
            .collect(),
        _ => matches.collect(),
    }
}

/// Count and relative weight per item kind; weights share one denominator,
/// the total number of detected items.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternItemFeatures {
    pub counts: [u64; 6],
    pub weights: [f64; 6],
}

impl PatternItemFeatures {
    pub fn count(&self, kind: ItemKind) -> u64 {
        self.counts[kind as usize]
    }

    pub fn weight(&self, kind: ItemKind) -> f64 {
        self.weights[kind as usize]
    }

    pub(crate) fn values(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for k in 0..6 {
            out[2 * k] = self.counts[k] as f64;
            out[2 * k + 1] = self.weights[k];
        }
        out
    }
}

pub fn pattern_item_features(raw_text: &str) -> PatternItemFeatures {
    let mut counts = [0u64; 6];
    for kind in ItemKind::ALL {
        counts[kind as usize] = find_items(kind, raw_text).len() as u64;
    }
    let total: u64 = counts.iter().sum();
    let weights = if total == 0 {
        [0.0; 6]
    } else {
        counts.map(|c| c as f64 / total as f64)
    };
    PatternItemFeatures { counts, weights }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn fixture_items() {
        let text = "pay 1A1zP1eP5QGefi2DMPTfTL5SLmv7DivfNa or mail a@b.co, host 10.0.0.1 at http://x.onion/p";
        let f = pattern_item_features(text);
        assert_eq!(f.count(ItemKind::BitcoinAddress), 1);
        assert_eq!(f.count(ItemKind::Email), 1);
        assert_eq!(f.count(ItemKind::IpAddress), 1);
        assert_eq!(f.count(ItemKind::Url), 1);
        assert_eq!(f.count(ItemKind::Image), 0);
        assert_eq!(f.count(ItemKind::CreditCard), 0);
        for kind in [
            ItemKind::BitcoinAddress,
            ItemKind::Email,
            ItemKind::IpAddress,
            ItemKind::Url,
        ] {
            assert_eq!(f.weight(kind), 0.25);
        }
        assert_eq!(find_items(ItemKind::Url, text), vec!["http://x.onion/p"]);
    }

    #[test]
    fn emails_and_urls_weighting() {
        let emails = ["a@b.co", "x.y@mail.org", "z+1@q.net"];
        let urls: Vec<String> = (0..9).map(|i| format!("https://site{i}.com/p")).collect();
        let text = format!("{} {}", emails.join(" "), urls.join(" "));
        let f = pattern_item_features(&text);
        assert_eq!(f.count(ItemKind::Email), 3);
        assert_eq!(f.count(ItemKind::Url), 9);
        assert_eq!(f.weight(ItemKind::Email), 0.25);
        assert_eq!(f.weight(ItemKind::Url), 0.75);
    }

    #[test]
    fn empty_text_has_zero_weights() {
        assert_eq!(pattern_item_features(""), PatternItemFeatures::default());
    }

    #[test]
    fn ip_octets_bounded() {
        assert_eq!(
            find_items(ItemKind::IpAddress, "1.2.3.256"),
            Vec::<&str>::new()
        );
        assert_eq!(
            find_items(ItemKind::IpAddress, "255.255.255.255 and 192.168.1.10"),
            vec!["255.255.255.255", "192.168.1.10"]
        );
    }

    #[test]
    fn cards_require_luhn() {
        let found = find_items(
            ItemKind::CreditCard,
            "card 4111 1111 1111 1111 and 4111-1111-1111-1112 and 378282246310005",
        );
        assert_eq!(found, vec!["4111 1111 1111 1111", "378282246310005"]);
    }

    #[test]
    fn bare_onion_and_bech32() {
        assert_eq!(
            find_items(ItemKind::Url, "visit abcdefghij234567.onion/shop now"),
            vec!["abcdefghij234567.onion/shop"]
        );
        assert_eq!(
            find_items(
                ItemKind::BitcoinAddress,
                "to bc1qar0srrr7xfkvy5l643lydnw9re59gtzzwf5mdq ok"
            ),
            vec!["bc1qar0srrr7xfkvy5l643lydnw9re59gtzzwf5mdq"]
        );
    }

    #[test]
    fn image_tags_count_once() {
        assert_eq!(
            find_items(ItemKind::Image, r#"<img src="a.png"> b.JPG c.jpeg d.txt"#).len(),
            3
        );
    }

    proptest! {
        #[test]
        fn weights_sum_to_zero_or_one(text in "[a-z0-9@./: <>]{0,200}") {
            let f = pattern_item_features(&text);
            let sum: f64 = f.weights.iter().sum();
            if f.counts.iter().sum::<u64>() == 0 {
                prop_assert_eq!(sum, 0.0);
            } else {
                prop_assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }
}
