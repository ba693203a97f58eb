use std::ops::Range;

use crate::error::{Error, Result};

use super::csv::SeriesTable;

/// Chronological split: the last `⌈test_fraction·n⌉` rows are the test set.
///
/// The product is snapped to the nearest integer when it is within `1e-9` of
/// one, so that e.g. `0.28 · 25` counts as 7 despite binary rounding.
pub fn split_rows(n: usize, test_fraction: f64) -> Result<(Range<usize>, Range<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let x = test_fraction * n as f64;
    let test = if (x - x.round()).abs() <= 1e-9 * (n.max(1) as f64) {
        x.round()
    } else {
        x.ceil()
    } as usize;
    let train = n.saturating_sub(test);
    if train == 0 || test == 0 {
        return Err(Error::invalid(format!(
            "splitting {n} rows at test fraction {test_fraction} leaves {train} train / {test} test rows"
        )));
    }
    Ok((0..train, train..n))
}

pub fn split_train_test(table: &SeriesTable, test_fraction: f64) -> Result<(SeriesTable, SeriesTable)> {
    let (train, test) = split_rows(table.n_rows(), test_fraction)?;
    Ok((table.slice_rows(train), table.slice_rows(test)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_eighty_percent_is_test() {
        let (train, test) = split_rows(10, 0.8).unwrap();
        assert_eq!(train, 0..2);
        assert_eq!(test, 2..10);
    }

    #[test]
    fn even_split() {
        assert_eq!(split_rows(10, 0.5).unwrap(), (0..5, 5..10));
    }

    #[test]
    fn ceiling_that_empties_train_is_rejected() {
        assert!(split_rows(2, 0.9).is_err());
    }

    #[test]
    fn binary_rounding_does_not_bump_the_ceiling() {
        assert!(std::hint::black_box(0.28) * 25.0 > 7.0);
        assert_eq!(split_rows(25, 0.28).unwrap(), (0..18, 18..25));
        assert_eq!(split_rows(7, 0.5).unwrap(), (0..3, 3..7));
    }

    #[test]
    fn bad_fraction_rejected() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(split_rows(10, f).is_err());
        }
    }

    #[test]
    fn table_split_preserves_values() {
        let t = SeriesTable::from_columns(vec!["v".into()], vec![(1..=10).map(f64::from).collect()]).unwrap();
        let (train, test) = split_train_test(&t, 0.8).unwrap();
        assert_eq!(train.column(0), &[1.0, 2.0]);
        assert_eq!(test.column(0), &[3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
    }
}
