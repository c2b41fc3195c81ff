//! Synthetic fixtures: a ten-glyph toy script and ruled census pages.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablereader_core::net::AlphabetSpec;
use tablereader_core::preproc::{FieldPolygon, PixelBox};
use tablereader_core::{FieldType, Raster};

/// 3×5 bitmaps of the digits, one row per string.
const FONT: [[&str; 5]; 10] = [
    ["###", "#.#", "#.#", "#.#", "###"],
    [".#.", "##.", ".#.", ".#.", "###"],
    ["###", "..#", "###", "#..", "###"],
    ["###", "..#", "###", "..#", "###"],
    ["#.#", "#.#", "###", "..#", "..#"],
    ["###", "#..", "###", "..#", "###"],
    ["###", "#..", "###", "#.#", "###"],
    ["###", "..#", ".#.", ".#.", ".#."],
    ["###", "#.#", "###", "#.#", "###"],
    ["###", "#.#", "###", "..#", "###"],
];

pub const TOY_HEIGHT: usize = 16;
const SCALE: usize = 2;
const GLYPH_W: usize = 3 * SCALE;
const GLYPH_H: usize = 5 * SCALE;

pub fn toy_symbols() -> Vec<String> {
    (0..10).map(|d| d.to_string()).collect()
}

pub fn toy_alphabet_spec() -> AlphabetSpec {
    AlphabetSpec::Symbols(toy_symbols())
}

/// `n` distinct words of 1–4 toy symbols.
pub fn toy_dictionary(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<String> = Vec::with_capacity(n);
    while words.len() < n {
        let len = rng.gen_range(1..=4);
        let w: String = (0..len).map(|_| char::from(b'0' + rng.gen_range(0..10u8))).collect();
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words
}

fn stamp(r: &mut Raster, digit: usize, (x0, y0): (usize, usize), scale: usize, ink: std::ops::Range<u8>, rng: &mut ChaCha8Rng) {
    for (gy, row) in FONT[digit].iter().enumerate() {
        for (gx, c) in row.bytes().enumerate() {
            if c != b'#' {
                continue;
            }
            for dy in 0..scale {
                for dx in 0..scale {
                    let (x, y) = (x0 + gx * scale + dx, y0 + gy * scale + dy);
                    if x < r.width() && y < r.height() {
                        r.set(x, y, rng.gen_range(ink.clone()));
                    }
                }
            }
        }
    }
}

/// Renders `word` at height 16 with jittered baseline, spacing and paper
/// noise.
pub fn render_word(word: &str, rng: &mut ChaCha8Rng) -> Raster {
    let digits: Vec<usize> = word.bytes().map(|b| usize::from(b - b'0')).collect();
    let gaps: Vec<usize> = digits.iter().map(|_| rng.gen_range(2..=4)).collect();
    let width = 3 + digits.len() * GLYPH_W + gaps.iter().sum::<usize>() + 2;
    let data = (0..width * TOY_HEIGHT).map(|_| rng.gen_range(200..=255)).collect();
    let mut r = Raster::new(width, TOY_HEIGHT, data).expect("sized buffer");
    let mut x = 3;
    for (d, gap) in digits.iter().zip(&gaps) {
        let y = rng.gen_range(2..=TOY_HEIGHT - GLYPH_H - 2);
        stamp(&mut r, *d, (x, y), SCALE, 0..60, rng);
        x += GLYPH_W + gap;
    }
    r
}

/// `n` (word, image) pairs drawn uniformly from `dictionary`.
pub fn toy_samples(dictionary: &[String], n: usize, seed: u64) -> Vec<(String, Raster)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let w = dictionary.choose(&mut rng).expect("non-empty dictionary").clone();
            let r = render_word(&w, &mut rng);
            (w, r)
        })
        .collect()
}

/// Column order and widths of the synthetic form.
pub const TABLE_COLUMNS: [(FieldType, usize); 5] = [
    (FieldType::Name, 300),
    (FieldType::Relation, 150),
    (FieldType::Age, 80),
    (FieldType::Marital, 64),
    (FieldType::Birthplace, 220),
];

pub struct SyntheticCell {
    pub row: usize,
    pub field: FieldType,
    /// Rough outline as an annotator would draw it.
    pub polygon: FieldPolygon,
    /// Index into `row_lines` of the line above and into `col_lines` of the
    /// line to the left.
    pub top_line: usize,
    pub left_line: usize,
}

pub struct SyntheticTable {
    pub page: Raster,
    /// First pixel row of each horizontal rule, top to bottom.
    pub row_lines: Vec<usize>,
    /// First pixel column of each vertical rule, left to right.
    pub col_lines: Vec<usize>,
    pub cells: Vec<SyntheticCell>,
}

const LINE_THICKNESS: usize = 2;
const MARGIN: usize = 40;

/// A ruled page with `rows` data rows, the five census columns and pale
/// random digits in every cell. Row heights vary between 36 and 44 pixels.
pub fn synthetic_table(rows: usize, seed: u64) -> SyntheticTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut col_lines = vec![MARGIN];
    for (_, w) in TABLE_COLUMNS {
        col_lines.push(col_lines.last().unwrap() + w);
    }
    let mut row_lines = vec![MARGIN];
    for _ in 0..rows {
        row_lines.push(row_lines.last().unwrap() + rng.gen_range(36..=44));
    }
    let width = col_lines.last().unwrap() + LINE_THICKNESS + MARGIN;
    let height = row_lines.last().unwrap() + LINE_THICKNESS + MARGIN;
    let data = (0..width * height).map(|_| rng.gen_range(225..=255)).collect();
    let mut page = Raster::new(width, height, data).expect("sized buffer");

    let (x_lo, x_hi) = (col_lines[0], col_lines[col_lines.len() - 1] + LINE_THICKNESS);
    let (y_lo, y_hi) = (row_lines[0], row_lines[row_lines.len() - 1] + LINE_THICKNESS);
    for &y in &row_lines {
        for yy in y..y + LINE_THICKNESS {
            for x in x_lo..x_hi {
                page.set(x, yy, rng.gen_range(0..50));
            }
        }
    }
    for &x in &col_lines {
        for xx in x..x + LINE_THICKNESS {
            for y in y_lo..y_hi {
                page.set(xx, y, rng.gen_range(0..50));
            }
        }
    }

    let mut cells = Vec::new();
    for row in 0..rows {
        let (top, bottom) = (row_lines[row], row_lines[row + 1]);
        for (c, (field, _)) in TABLE_COLUMNS.iter().enumerate() {
            let (left, right) = (col_lines[c], col_lines[c + 1]);
            // pale digits as stand-in handwriting, lighter than the rules
            let n = rng.gen_range(1..=((right - left - 16) / 12).min(6));
            let mut x = left + 6 + rng.gen_range(0..4);
            for _ in 0..n {
                let y = top + LINE_THICKNESS + 4 + rng.gen_range(0..(bottom - top - 25));
                stamp(&mut page, rng.gen_range(0..10), (x, y), 3, 110..160, &mut rng);
                x += 12;
            }
            let mut j = || rng.gen_range(-4i64..=4);
            let b = PixelBox {
                left: left as i64 + 4 + j(),
                top: top as i64 + 4 + j(),
                right: right as i64 - 4 + j(),
                bottom: bottom as i64 - 4 + j(),
            };
            cells.push(SyntheticCell { row, field: *field, polygon: FieldPolygon::rectangle(b, *field), top_line: row, left_line: c });
        }
    }
    SyntheticTable { page, row_lines, col_lines, cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_words_and_images() {
        let d = toy_dictionary(50, 1);
        assert_eq!(d.len(), 50);
        assert!(d.iter().all(|w| (1..=4).contains(&w.len())));
        let s = toy_samples(&d, 5, 2);
        assert!(s.iter().all(|(_, r)| r.height() == TOY_HEIGHT));
        assert_eq!(toy_samples(&d, 5, 2)[3].1, s[3].1);
    }

    #[test]
    fn table_geometry() {
        let t = synthetic_table(3, 4);
        assert_eq!(t.row_lines.len(), 4);
        assert_eq!(t.col_lines.len(), 6);
        assert_eq!(t.cells.len(), 15);
        assert!(t.page.get(t.col_lines[2], t.row_lines[1] + 5) < 60);
    }
}
