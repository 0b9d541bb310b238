//! Baseline text-layer extractor.
//!
//! Walks each page's content stream, tracking the graphics and text matrices,
//! and records one run per text-showing operator at its user-space origin.
//! Runs sharing a baseline within the same column are merged into a block.
//!
//! Reading order: a page is two-column when it has runs wholly left and
//! wholly right of the vertical midline. Runs that straddle the midline
//! (titles, footers) split the page into bands; inside each band the left
//! column is read top to bottom, then the right column. Glyph widths are
//! not read from font programs, so run extents are estimated at half an em
//! per character.

use std::collections::HashMap;

use lopdf::content::Content;
use lopdf::{Document, Object};

use super::{ExtractError, ExtractedDocument, ExtractorBackend, Page, TextBlock};
use crate::registry::PdfBlob;

pub const NO_TEXT_LAYER: &str = "no text layer";

const DEFAULT_PAGE_WIDTH: f64 = 612.0;
const EM_ESTIMATE: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default)]
pub struct TextLayerExtractor;

impl ExtractorBackend for TextLayerExtractor {
    fn name(&self) -> &str {
        "text-layer"
    }

    fn extract(&self, pdf: &PdfBlob) -> Result<ExtractedDocument, ExtractError> {
        let doc = Document::load_mem(&pdf.bytes).map_err(|e| ExtractError::CorruptPdf {
            doc_id: pdf.doc_id.clone(),
            reason: e.to_string(),
        })?;
        let pages = doc.get_pages();
        if pages.is_empty() {
            return Err(ExtractError::CorruptPdf {
                doc_id: pdf.doc_id.clone(),
                reason: "document has no pages".into(),
            });
        }
        let mut out = ExtractedDocument {
            doc_id: pdf.doc_id.clone(),
            retrieved_at: pdf.retrieved_at,
            pages: Vec::with_capacity(pages.len()),
            notes: Vec::new(),
        };
        for (number, page_id) in pages {
            let runs = page_runs(&doc, page_id).map_err(|reason| ExtractError::CorruptPdf {
                doc_id: pdf.doc_id.clone(),
                reason: format!("page {number}: {reason}"),
            })?;
            if runs.is_empty() {
                out.notes.push(format!("page {number}: {NO_TEXT_LAYER}"));
            }
            let width = page_width(&doc, page_id);
            let blocks = order_runs(runs, width)
                .into_iter()
                .enumerate()
                .map(|(i, text)| TextBlock {
                    text,
                    reading_order_index: i as u32,
                    page_number: number,
                })
                .collect();
            out.pages.push(Page {
                page_number: number,
                blocks,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Run {
    pub x: f64,
    pub y: f64,
    pub size: f64,
    pub text: String,
}

impl Run {
    fn x_end(&self) -> f64 {
        self.x + self.text.chars().count() as f64 * self.size * EM_ESTIMATE
    }
}

type Matrix = [f64; 6];

const IDENTITY: Matrix = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];

fn multiply(m: &Matrix, n: &Matrix) -> Matrix {
    [
        m[0] * n[0] + m[1] * n[2],
        m[0] * n[1] + m[1] * n[3],
        m[2] * n[0] + m[3] * n[2],
        m[2] * n[1] + m[3] * n[3],
        m[4] * n[0] + m[5] * n[2] + n[4],
        m[4] * n[1] + m[5] * n[3] + n[5],
    ]
}

fn translate(tx: f64, ty: f64) -> Matrix {
    [1.0, 0.0, 0.0, 1.0, tx, ty]
}

fn number(obj: &Object) -> Option<f64> {
    match obj {
        Object::Integer(i) => Some(*i as f64),
        Object::Real(r) => Some(f64::from(*r)),
        _ => None,
    }
}

fn numbers<const N: usize>(operands: &[Object]) -> Option<[f64; N]> {
    if operands.len() < N {
        return None;
    }
    let mut out = [0.0; N];
    for (slot, obj) in out.iter_mut().zip(operands) {
        *slot = number(obj)?;
    }
    Some(out)
}

fn page_width(doc: &Document, page_id: lopdf::ObjectId) -> f64 {
    doc.get_dictionary(page_id)
        .ok()
        .and_then(|page| page.get(b"MediaBox").ok())
        .and_then(|b| b.as_array().ok())
        .and_then(|b| Some(number(b.get(2)?)? - number(b.first()?)?))
        .unwrap_or(DEFAULT_PAGE_WIDTH)
}

struct TextState {
    ctm: Matrix,
    stack: Vec<Matrix>,
    tm: Matrix,
    tlm: Matrix,
    font: Vec<u8>,
    size: f64,
    leading: f64,
}

fn page_runs(doc: &Document, page_id: lopdf::ObjectId) -> Result<Vec<Run>, String> {
    let content = Content::decode(&doc.get_page_content(page_id)).map_err(|e| e.to_string())?;
    let fonts = doc.get_page_fonts(page_id).map_err(|e| e.to_string())?;
    let mut encodings = HashMap::new();
    for (name, font) in &fonts {
        if let Ok(enc) = font.get_font_encoding(doc) {
            encodings.insert(name.clone(), enc);
        }
    }
    let decode = |font: &[u8], bytes: &[u8]| -> String {
        match encodings.get(font) {
            Some(enc) => Document::decode_text(enc, bytes)
                .unwrap_or_else(|_| String::from_utf8_lossy(bytes).into()),
            None => String::from_utf8_lossy(bytes).into_owned(),
        }
    };

    let mut st = TextState {
        ctm: IDENTITY,
        stack: Vec::new(),
        tm: IDENTITY,
        tlm: IDENTITY,
        font: Vec::new(),
        size: 0.0,
        leading: 0.0,
    };
    let mut runs = Vec::new();
    let mut show = |st: &TextState, text: String| {
        if text.trim().is_empty() {
            return;
        }
        let m = multiply(&st.tm, &st.ctm);
        runs.push(Run {
            x: m[4],
            y: m[5],
            size: st.size * m[3].abs().max(f64::EPSILON),
            text,
        });
    };

    for op in &content.operations {
        let args = &op.operands;
        match op.operator.as_str() {
            "q" => st.stack.push(st.ctm),
            "Q" => st.ctm = st.stack.pop().unwrap_or(IDENTITY),
            "cm" => {
                if let Some(m) = numbers::<6>(args) {
                    st.ctm = multiply(&m, &st.ctm);
                }
            }
            "BT" => {
                st.tm = IDENTITY;
                st.tlm = IDENTITY;
            }
            "Tf" => {
                if let (Some(Object::Name(name)), Some(size)) =
                    (args.first(), args.get(1).and_then(number))
                {
                    st.font = name.clone();
                    st.size = size;
                }
            }
            "TL" => {
                if let Some([l]) = numbers::<1>(args) {
                    st.leading = l;
                }
            }
            "Td" | "TD" => {
                if let Some([tx, ty]) = numbers::<2>(args) {
                    if op.operator == "TD" {
                        st.leading = -ty;
                    }
                    st.tlm = multiply(&translate(tx, ty), &st.tlm);
                    st.tm = st.tlm;
                }
            }
            "Tm" => {
                if let Some(m) = numbers::<6>(args) {
                    st.tlm = m;
                    st.tm = m;
                }
            }
            "T*" => {
                st.tlm = multiply(&translate(0.0, -st.leading), &st.tlm);
                st.tm = st.tlm;
            }
            "Tj" | "'" | "\"" => {
                if op.operator != "Tj" {
                    st.tlm = multiply(&translate(0.0, -st.leading), &st.tlm);
                    st.tm = st.tlm;
                }
                if let Some(Object::String(bytes, _)) = args.last() {
                    let text = decode(&st.font, bytes);
                    show(&st, text);
                }
            }
            "TJ" => {
                if let Some(Object::Array(parts)) = args.first() {
                    let mut text = String::new();
                    for part in parts {
                        match part {
                            Object::String(bytes, _) => text.push_str(&decode(&st.font, bytes)),
                            other => {
                                if number(other).is_some_and(|adj| adj < -200.0) {
                                    text.push(' ');
                                }
                            }
                        }
                    }
                    show(&st, text);
                }
            }
            _ => {}
        }
    }
    Ok(runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    Left,
    Right,
    Span,
}

/// Orders runs into text blocks, one block per baseline per column.
pub(crate) fn order_runs(runs: Vec<Run>, page_width: f64) -> Vec<String> {
    let mid = page_width / 2.0;
    let column = |r: &Run| {
        if r.x_end() <= mid {
            Column::Left
        } else if r.x >= mid {
            Column::Right
        } else {
            Column::Span
        }
    };
    let two_column = runs.iter().any(|r| column(r) == Column::Left)
        && runs.iter().any(|r| column(r) == Column::Right);
    let tagged: Vec<(Column, Run)> = runs
        .into_iter()
        .map(|r| {
            let c = if two_column { column(&r) } else { Column::Left };
            (c, r)
        })
        .collect();

    // Spanning lines cut the page into horizontal bands, read top to bottom.
    let mut cuts: Vec<f64> = tagged
        .iter()
        .filter(|(c, _)| *c == Column::Span)
        .map(|(_, r)| r.y)
        .collect();
    cuts.sort_by(|a, b| b.total_cmp(a));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1.0);

    let band_of = |y: f64| cuts.iter().filter(|&&c| c > y + 0.5).count();
    let mut blocks = Vec::new();
    for band in 0..=cuts.len() {
        if band > 0 {
            let cut = cuts[band - 1];
            let spans: Vec<&Run> = tagged
                .iter()
                .filter(|(c, r)| *c == Column::Span && (r.y - cut).abs() < 1.0)
                .map(|(_, r)| r)
                .collect();
            blocks.extend(merge_lines(spans));
        }
        for col in [Column::Left, Column::Right] {
            let members: Vec<&Run> = tagged
                .iter()
                .filter(|(c, r)| *c == col && band_of(r.y) == band)
                .map(|(_, r)| r)
                .collect();
            blocks.extend(merge_lines(members));
        }
    }
    blocks
}

/// Groups runs by baseline (top to bottom) and joins each line left to right.
fn merge_lines(mut runs: Vec<&Run>) -> Vec<String> {
    runs.sort_by(|a, b| b.y.total_cmp(&a.y).then(a.x.total_cmp(&b.x)));
    let mut lines: Vec<(f64, Vec<&Run>)> = Vec::new();
    for run in runs {
        let tolerance = (run.size * 0.3).max(1.0);
        match lines.last_mut() {
            Some((y, members)) if (*y - run.y).abs() <= tolerance => members.push(run),
            _ => lines.push((run.y, vec![run])),
        }
    }
    lines
        .into_iter()
        .map(|(_, mut members)| {
            members.sort_by(|a, b| a.x.total_cmp(&b.x));
            members
                .iter()
                .map(|r| r.text.trim())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(x: f64, y: f64, text: &str) -> Run {
        Run {
            x,
            y,
            size: 10.0,
            text: text.into(),
        }
    }

    #[test]
    fn two_columns_read_left_then_right() {
        let runs = vec![
            run(60.0, 700.0, "L1"),
            run(320.0, 700.0, "R1"),
            run(60.0, 680.0, "L2"),
            run(320.0, 680.0, "R2"),
        ];
        assert_eq!(order_runs(runs, 612.0), vec!["L1", "L2", "R1", "R2"]);
    }

    #[test]
    fn spanning_line_separates_bands() {
        let runs = vec![
            run(200.0, 760.0, "A title that crosses the middle of the page"),
            run(60.0, 700.0, "L1"),
            run(320.0, 700.0, "R1"),
            run(100.0, 600.0, "A footer line that also spans both columns"),
            run(60.0, 560.0, "L2"),
            run(320.0, 560.0, "R2"),
        ];
        assert_eq!(
            order_runs(runs, 612.0),
            vec![
                "A title that crosses the middle of the page",
                "L1",
                "R1",
                "A footer line that also spans both columns",
                "L2",
                "R2"
            ]
        );
    }

    #[test]
    fn single_column_merges_baselines() {
        let runs = vec![
            run(150.0, 700.0, "world"),
            run(60.0, 700.4, "hello"),
            run(60.0, 680.0, "next"),
        ];
        assert_eq!(order_runs(runs, 612.0), vec!["hello world", "next"]);
    }

    #[test]
    fn matrix_product_applies_translation() {
        let m = multiply(&translate(10.0, 20.0), &[2.0, 0.0, 0.0, 2.0, 5.0, 5.0]);
        assert_eq!(m, [2.0, 0.0, 0.0, 2.0, 25.0, 45.0]);
    }
}
