//! Image selection by acquisition season and quality thresholds.

use std::cmp::Ordering;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::geo::Hemisphere;
use crate::ingest::ImageMeta;

/// One set of acquisition-quality thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityRule {
    /// Cloud cover fraction limit.
    pub max_cloud_cover: f64,
    /// Whether cloud cover equal to the limit passes.
    pub cloud_cover_inclusive: bool,
    /// Sun elevation must be strictly above this (degrees).
    pub min_sun_elevation: f64,
    /// View angle must be strictly below this (degrees).
    pub max_view_angle: f64,
}

impl QualityRule {
    pub const STRICT: QualityRule = QualityRule {
        max_cloud_cover: 0.0,
        cloud_cover_inclusive: true,
        min_sun_elevation: 50.0,
        max_view_angle: 5.0,
    };
    pub const RELAXED: QualityRule = QualityRule {
        max_cloud_cover: 0.10,
        cloud_cover_inclusive: false,
        min_sun_elevation: 60.0,
        max_view_angle: 10.0,
    };

    pub fn accepts(&self, m: &ImageMeta) -> bool {
        let cloud_ok = if self.cloud_cover_inclusive {
            m.cloud_cover <= self.max_cloud_cover
        } else {
            m.cloud_cover < self.max_cloud_cover
        };
        cloud_ok && m.sun_elevation > self.min_sun_elevation && m.view_angle < self.max_view_angle
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionCriteria {
    /// Target acquisition year.
    pub year: i32,
    #[serde(default = "strict_default")]
    pub strict: QualityRule,
    #[serde(default = "relaxed_default")]
    pub relaxed: QualityRule,
}

fn strict_default() -> QualityRule {
    QualityRule::STRICT
}

fn relaxed_default() -> QualityRule {
    QualityRule::RELAXED
}

impl SelectionCriteria {
    pub fn for_year(year: i32) -> Self {
        SelectionCriteria {
            year,
            strict: QualityRule::STRICT,
            relaxed: QualityRule::RELAXED,
        }
    }

    /// Summer window of the target year: Jun 1 – Aug 30 in the north; Jan 1 –
    /// Feb 28 and Dec 1 – Dec 31 in the south.
    pub fn in_season(&self, date: NaiveDate, hemisphere: Hemisphere) -> bool {
        if date.year() != self.year {
            return false;
        }
        let md = (date.month(), date.day());
        match hemisphere {
            Hemisphere::North => (6, 1) <= md && md <= (8, 30),
            Hemisphere::South => md <= (2, 28) || md >= (12, 1),
        }
    }
}

/// Which rule set admitted the selected image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionPath {
    Strict,
    Relaxed,
}

/// In-season candidate with the smallest view angle under the strict rule,
/// else under the relaxed rule. Ties go to the earliest date, then the
/// lexicographically smallest id.
pub fn select_image<'a>(
    candidates: &'a [ImageMeta],
    criteria: &SelectionCriteria,
) -> Option<(&'a ImageMeta, SelectionPath)> {
    let in_season: Vec<&ImageMeta> = candidates
        .iter()
        .filter(|m| criteria.in_season(m.acquisition_date, m.hemisphere))
        .collect();
    let best = |rule: &QualityRule| {
        in_season
            .iter()
            .copied()
            .filter(|m| rule.accepts(m))
            .min_by(|a, b| rank(a, b))
    };
    best(&criteria.strict)
        .map(|m| (m, SelectionPath::Strict))
        .or_else(|| best(&criteria.relaxed).map(|m| (m, SelectionPath::Relaxed)))
}

fn rank(a: &ImageMeta, b: &ImageMeta) -> Ordering {
    a.view_angle
        .total_cmp(&b.view_angle)
        .then(a.acquisition_date.cmp(&b.acquisition_date))
        .then_with(|| a.id.cmp(&b.id))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(id: &str, date: &str, cloud: f64, sun: f64, view: f64) -> ImageMeta {
        ImageMeta {
            id: id.into(),
            acquisition_date: date.parse().unwrap(),
            cloud_cover: cloud,
            sun_elevation: sun,
            view_angle: view,
            hemisphere: Hemisphere::North,
        }
    }

    #[test]
    fn smallest_view_angle_wins() {
        let c = [
            meta("a", "2021-07-01", 0.0, 55.0, 4.0),
            meta("b", "2021-07-02", 0.0, 55.0, 2.0),
        ];
        let (m, path) = select_image(&c, &SelectionCriteria::for_year(2021)).unwrap();
        assert_eq!((m.id.as_str(), path), ("b", SelectionPath::Strict));
    }

    #[test]
    fn relaxed_fallback() {
        let c = [meta("a", "2021-07-01", 0.05, 65.0, 8.0)];
        let (m, path) = select_image(&c, &SelectionCriteria::for_year(2021)).unwrap();
        assert_eq!((m.id.as_str(), path), ("a", SelectionPath::Relaxed));
    }

    #[test]
    fn empty_and_out_of_season() {
        assert!(select_image(&[], &SelectionCriteria::for_year(2021)).is_none());
        let c = [
            meta("late", "2021-08-31", 0.0, 55.0, 1.0),
            meta("other_year", "2020-07-01", 0.0, 55.0, 1.0),
        ];
        assert!(select_image(&c, &SelectionCriteria::for_year(2021)).is_none());
    }

    #[test]
    fn strict_boundaries() {
        let crit = SelectionCriteria::for_year(2021);
        assert!(!crit.strict.accepts(&meta("x", "2021-07-01", 0.0, 50.0, 1.0)));
        assert!(!crit.strict.accepts(&meta("x", "2021-07-01", 0.0, 51.0, 5.0)));
        assert!(!crit.relaxed.accepts(&meta("x", "2021-07-01", 0.10, 61.0, 1.0)));
    }

    #[test]
    fn southern_window() {
        let crit = SelectionCriteria::for_year(2022);
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        assert!(crit.in_season(d("2022-01-15"), Hemisphere::South));
        assert!(crit.in_season(d("2022-12-01"), Hemisphere::South));
        assert!(!crit.in_season(d("2022-03-01"), Hemisphere::South));
        assert!(!crit.in_season(d("2024-02-29"), Hemisphere::South));
        assert!(!crit.in_season(d("2022-07-01"), Hemisphere::South));
    }

    #[test]
    fn tie_breaks() {
        let c = [
            meta("z", "2021-07-03", 0.0, 55.0, 2.0),
            meta("y", "2021-07-01", 0.0, 55.0, 2.0),
            meta("x", "2021-07-01", 0.0, 55.0, 2.0),
        ];
        let (m, _) = select_image(&c, &SelectionCriteria::for_year(2021)).unwrap();
        assert_eq!(m.id, "x");
    }
}
