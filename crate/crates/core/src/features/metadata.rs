use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Source};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetadataFeatures {
    pub src_deep: f64,
    pub src_dark: f64,
    pub src_social: f64,
    pub src_pastebin: f64,
    /// Whole days since 1970-01-01 UTC, scaled by 1e-4.
    pub date_scalar: f64,
}

pub(crate) fn days_since_epoch(date: NaiveDate) -> i64 {
    let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch");
    (date - epoch).num_days()
}

pub fn metadata_features(doc: &Document) -> MetadataFeatures {
    let hot = |s: Source| if doc.source == s { 1.0 } else { 0.0 };
    MetadataFeatures {
        src_deep: hot(Source::DeepWeb),
        src_dark: hot(Source::DarkWeb),
        src_social: hot(Source::SocialMedia),
        src_pastebin: hot(Source::Pastebin),
        date_scalar: days_since_epoch(doc.timestamp.date_naive()) as f64 * 1e-4,
    }
}

impl MetadataFeatures {
    pub(crate) fn values(&self) -> [f64; 5] {
        [
            self.src_deep,
            self.src_dark,
            self.src_social,
            self.src_pastebin,
            self.date_scalar,
        ]
    }
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;

    fn doc(source: Source, y: i32, m: u32, d: u32) -> Document {
        Document {
            id: "m".into(),
            source,
            timestamp: Utc.with_ymd_and_hms(y, m, d, 0, 0, 0).unwrap(),
            raw_text: String::new(),
            labels: None,
        }
    }

    #[test]
    fn one_hot_source() {
        let m = metadata_features(&doc(Source::Pastebin, 2022, 1, 1));
        assert_eq!(
            [m.src_deep, m.src_dark, m.src_social, m.src_pastebin],
            [0.0, 0.0, 0.0, 1.0]
        );
        for src in Source::ALL {
            let m = metadata_features(&doc(src, 2022, 1, 1));
            assert_eq!(m.values()[..4].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn epoch_is_zero() {
        assert_eq!(
            metadata_features(&doc(Source::DarkWeb, 1970, 1, 1)).date_scalar,
            0.0
        );
    }

    #[test]
    fn day_count_against_civil_calendar() {
        // Independent day count: whole years plus leap days plus days into January.
        let years = 2022 - 1970;
        let leap_days = (1970..2022)
            .filter(|y| (y % 4 == 0 && y % 100 != 0) || y % 400 == 0)
            .count() as i64;
        let expected = years * 365 + leap_days + 4;
        assert_eq!(expected, 18997);
        let m = metadata_features(&doc(Source::DarkWeb, 2022, 1, 5));
        assert_eq!(m.date_scalar, expected as f64 * 1e-4);
        assert!((m.date_scalar - 1.8997).abs() < 1e-12);
    }
}
