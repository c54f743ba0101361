//! Bus-word layouts.
//!
//! A [`Layout`] describes one repeating pattern of bus words. Each
//! [`Placement`] maps an inclusive bit range of one array element onto a bit
//! offset of one word in the pattern. The pattern holds `k` kernel
//! iterations and is repeated `repetitions` times to cover the channel.
//!
//! Text form (stored in a channel's `layout` attribute):
//!
//! ```text
//! W=128;k=1;rep=20;a:0:0-31@0:0,b:0:0-31@0:32,b:1:0-31@0:64,b:2:0-31@0:96
//! ```
//!
//! Unused bits in the pattern are written out as hole entries named `~`
//! (`~:<n>:0-<len-1>@<word>:<offset>`), so the efficiency of a layout can be
//! read off its text alone.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub const HOLE_NAME: &str = "~";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Placement {
    pub array: String,
    /// Element index within one pattern.
    pub elem: u32,
    /// Inclusive bit range within the element.
    pub bit_lo: u32,
    pub bit_hi: u32,
    /// Word index within one pattern.
    pub word: u32,
    /// Bit offset within the word.
    pub offset: u32,
}

impl Placement {
    pub fn len(&self) -> u32 {
        self.bit_hi - self.bit_lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// An unused bit range inside a pattern word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hole {
    pub word: u32,
    pub offset: u32,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Layout {
    pub bus_width: u32,
    pub k: u32,
    pub repetitions: u64,
    pub placements: Vec<Placement>,
}

/// Per-array view of a layout, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayShape {
    pub name: String,
    pub element_width: u32,
    pub elements_per_pattern: u32,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LayoutError {
    #[error("malformed layout: {0}")]
    Syntax(String),
    #[error("layout has no placements")]
    Empty,
    #[error("layout field `{0}` must be at least 1")]
    NonPositive(&'static str),
    #[error("placement {array}:{elem} has inverted bit range {lo}-{hi}")]
    InvertedRange {
        array: String,
        elem: u32,
        lo: u32,
        hi: u32,
    },
    #[error("placement {array}:{elem} overruns the {bus_width}-bit word")]
    Overrun {
        array: String,
        elem: u32,
        bus_width: u32,
    },
    #[error("placements overlap in word {word} at bit {offset}")]
    Overlap { word: u32, offset: u32 },
    #[error("array `{array}` element {elem}: {reason}")]
    Coverage {
        array: String,
        elem: u32,
        reason: String,
    },
    #[error("array `{0}` is not laid out in stream order")]
    Order(String),
    #[error("hole entries do not match the unused bits of the pattern")]
    HoleMismatch,
}

impl Layout {
    /// The layout a freshly sanitized channel gets: one whole element per
    /// word, one word per pattern, repeated `depth` times.
    pub fn single_element(array: &str, element_width: u32, depth: u64) -> Layout {
        Layout {
            bus_width: element_width,
            k: 1,
            repetitions: depth,
            placements: vec![Placement {
                array: array.to_string(),
                elem: 0,
                bit_lo: 0,
                bit_hi: element_width - 1,
                word: 0,
                offset: 0,
            }],
        }
    }

    /// `lanes` copies of one array side by side in a single word, named
    /// `name#0 .. name#<lanes-1>`.
    pub fn lanes(array: &str, element_width: u32, lanes: u32, repetitions: u64) -> Layout {
        let placements = (0..lanes)
            .map(|lane| Placement {
                array: lane_array_name(array, lane),
                elem: 0,
                bit_lo: 0,
                bit_hi: element_width - 1,
                word: 0,
                offset: lane * element_width,
            })
            .collect();
        Layout {
            bus_width: lanes * element_width,
            k: 1,
            repetitions,
            placements,
        }
    }

    pub fn words_per_pattern(&self) -> u32 {
        self.placements
            .iter()
            .map(|p| p.word + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn useful_bits_per_pattern(&self) -> u64 {
        self.placements.iter().map(|p| p.len() as u64).sum()
    }

    /// Total words on the channel.
    pub fn total_words(&self) -> u64 {
        self.words_per_pattern() as u64 * self.repetitions
    }

    /// Fraction of transferred bits that carry payload.
    pub fn efficiency(&self) -> f64 {
        let words = self.words_per_pattern() as u64;
        if words == 0 {
            return 0.0;
        }
        self.useful_bits_per_pattern() as f64 / (words * self.bus_width as u64) as f64
    }

    pub fn arrays(&self) -> Vec<ArrayShape> {
        let mut order: Vec<String> = Vec::new();
        let mut widths: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
        for p in &self.placements {
            let entry = widths.entry(p.array.as_str()).or_insert_with(|| {
                order.push(p.array.clone());
                (0, 0)
            });
            entry.0 = entry.0.max(p.bit_hi + 1);
            entry.1 = entry.1.max(p.elem + 1);
        }
        order
            .into_iter()
            .map(|name| {
                let (w, n) = widths[name.as_str()];
                ArrayShape {
                    name,
                    element_width: w,
                    elements_per_pattern: n,
                }
            })
            .collect()
    }

    /// True when the layout is the one-array, whole-element form produced by
    /// sanitize: nothing has been packed, split or laned yet.
    pub fn is_single_element(&self) -> bool {
        self.k == 1
            && self.placements.len() == 1
            && self.placements[0].bit_lo == 0
            && self.placements[0].offset == 0
            && self.placements[0].len() == self.bus_width
    }

    /// Unused bit ranges of the pattern, in (word, offset) order.
    pub fn holes(&self) -> Vec<Hole> {
        let words = self.words_per_pattern();
        let mut used: Vec<Vec<(u32, u32)>> = vec![Vec::new(); words as usize];
        for p in &self.placements {
            used[p.word as usize].push((p.offset, p.offset + p.len()));
        }
        let mut holes = Vec::new();
        for (word, spans) in used.iter_mut().enumerate() {
            spans.sort_unstable();
            let mut cursor = 0;
            for &(start, end) in spans.iter() {
                if start > cursor {
                    holes.push(Hole {
                        word: word as u32,
                        offset: cursor,
                        len: start - cursor,
                    });
                }
                cursor = cursor.max(end);
            }
            if cursor < self.bus_width {
                holes.push(Hole {
                    word: word as u32,
                    offset: cursor,
                    len: self.bus_width - cursor,
                });
            }
        }
        holes
    }

    /// Checks non-overlap, bounds, per-element coverage and stream order.
    pub fn validate(&self) -> Result<(), LayoutError> {
        if self.bus_width == 0 {
            return Err(LayoutError::NonPositive("W"));
        }
        if self.k == 0 {
            return Err(LayoutError::NonPositive("k"));
        }
        if self.repetitions == 0 {
            return Err(LayoutError::NonPositive("rep"));
        }
        if self.placements.is_empty() {
            return Err(LayoutError::Empty);
        }
        for p in &self.placements {
            if p.bit_lo > p.bit_hi {
                return Err(LayoutError::InvertedRange {
                    array: p.array.clone(),
                    elem: p.elem,
                    lo: p.bit_lo,
                    hi: p.bit_hi,
                });
            }
            if p.offset as u64 + (p.bit_hi - p.bit_lo) as u64 >= self.bus_width as u64 {
                return Err(LayoutError::Overrun {
                    array: p.array.clone(),
                    elem: p.elem,
                    bus_width: self.bus_width,
                });
            }
        }

        let mut by_word: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
        for p in &self.placements {
            by_word
                .entry(p.word)
                .or_default()
                .push((p.offset, p.offset + p.len()));
        }
        for (word, spans) in by_word.iter_mut() {
            spans.sort_unstable();
            for pair in spans.windows(2) {
                if pair[1].0 < pair[0].1 {
                    return Err(LayoutError::Overlap {
                        word: *word,
                        offset: pair[1].0,
                    });
                }
            }
        }

        for shape in self.arrays() {
            let mut segs: Vec<&Placement> = self
                .placements
                .iter()
                .filter(|p| p.array == shape.name)
                .collect();
            segs.sort_by_key(|p| (p.elem, p.bit_lo));
            for elem in 0..shape.elements_per_pattern {
                let mut cursor = 0;
                for p in segs.iter().filter(|p| p.elem == elem) {
                    if p.bit_lo != cursor {
                        return Err(LayoutError::Coverage {
                            array: shape.name.clone(),
                            elem,
                            reason: format!("expected a segment starting at bit {cursor}"),
                        });
                    }
                    cursor = p.bit_hi + 1;
                }
                if cursor != shape.element_width {
                    return Err(LayoutError::Coverage {
                        array: shape.name.clone(),
                        elem,
                        reason: format!(
                            "covers {cursor} bits, array elements are {} bits",
                            shape.element_width
                        ),
                    });
                }
            }
            for pair in segs.windows(2) {
                if (pair[1].word, pair[1].offset) < (pair[0].word, pair[0].offset) {
                    return Err(LayoutError::Order(shape.name.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Layout, LayoutError> {
        let syntax = |msg: String| LayoutError::Syntax(msg);
        let mut bus_width = None;
        let mut k = None;
        let mut repetitions = None;
        let mut body = "";
        for part in text.trim().split(';') {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            match part.split_once('=') {
                Some((key, value)) if !part.contains(':') => {
                    let value: u64 = value
                        .trim()
                        .parse()
                        .map_err(|_| syntax(format!("bad number in `{part}`")))?;
                    match key.trim() {
                        "W" => bus_width = Some(to_u32(value, "W")?),
                        "k" => k = Some(to_u32(value, "k")?),
                        "rep" => repetitions = Some(value),
                        other => return Err(syntax(format!("unknown layout field `{other}`"))),
                    }
                }
                _ => {
                    if !body.is_empty() {
                        return Err(syntax("placements must be the last field".into()));
                    }
                    body = part;
                }
            }
        }
        let bus_width = bus_width.ok_or_else(|| syntax("missing `W`".into()))?;
        let k = k.ok_or_else(|| syntax("missing `k`".into()))?;
        let repetitions = repetitions.unwrap_or(1);

        let mut placements = Vec::new();
        let mut holes = Vec::new();
        for entry in body.split(',').map(str::trim).filter(|e| !e.is_empty()) {
            let p = parse_placement(entry)?;
            if p.array == HOLE_NAME {
                holes.push(Hole {
                    word: p.word,
                    offset: p.offset,
                    len: p.len(),
                });
            } else {
                placements.push(p);
            }
        }
        let layout = Layout {
            bus_width,
            k,
            repetitions,
            placements,
        };
        layout.validate()?;
        if !holes.is_empty() && holes != layout.holes() {
            return Err(LayoutError::HoleMismatch);
        }
        Ok(layout)
    }
}

fn to_u32(v: u64, field: &'static str) -> Result<u32, LayoutError> {
    u32::try_from(v).map_err(|_| LayoutError::Syntax(format!("`{field}` out of range")))
}

fn parse_placement(entry: &str) -> Result<Placement, LayoutError> {
    let bad = || LayoutError::Syntax(format!("bad placement `{entry}`"));
    let (lhs, rhs) = entry.split_once('@').ok_or_else(bad)?;
    let mut fields = lhs.rsplitn(3, ':');
    let range = fields.next().ok_or_else(bad)?;
    let elem = fields.next().ok_or_else(bad)?;
    let array = fields.next().ok_or_else(bad)?;
    let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
    let (word, offset) = rhs.split_once(':').ok_or_else(bad)?;
    let num = |s: &str| s.trim().parse::<u32>().map_err(|_| bad());
    if array.is_empty() {
        return Err(bad());
    }
    Ok(Placement {
        array: array.to_string(),
        elem: num(elem)?,
        bit_lo: num(lo)?,
        bit_hi: num(hi)?,
        word: num(word)?,
        offset: num(offset)?,
    })
}

pub fn lane_array_name(array: &str, lane: u32) -> String {
    format!("{array}#{lane}")
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "W={};k={};rep={};",
            self.bus_width, self.k, self.repetitions
        )?;
        let mut first = true;
        for p in &self.placements {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(
                f,
                "{}:{}:{}-{}@{}:{}",
                p.array, p.elem, p.bit_lo, p.bit_hi, p.word, p.offset
            )?;
        }
        for (i, h) in self.holes().iter().enumerate() {
            if !first {
                f.write_str(",")?;
            }
            first = false;
            write!(f, "{HOLE_NAME}:{i}:0-{}@{}:{}", h.len - 1, h.word, h.offset)?;
        }
        Ok(())
    }
}
