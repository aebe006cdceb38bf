//! Text grid maps.
//!
//! ```text
//! rows cols
//! <rows lines of exactly cols characters>
//! [legend]
//! <char> = <value>     # comments allowed in the legend
//! ```
//!
//! Grid characters: `.` free, `#` wall or seabed, `S` start, `G` goal; any
//! other character is a marker whose meaning comes from the legend.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{MorlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Free,
    Wall,
    Start,
    Goal,
    Marker(char),
}

#[derive(Clone, Debug)]
pub struct GridMap {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<Cell>,
    pub legend: BTreeMap<char, String>,
}

impl GridMap {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| MorlError::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| err(1, "missing `rows cols` header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(hline, format!("bad header: {e}")))?;
        let &[rows, cols] = dims.as_slice() else {
            return Err(err(hline, "header must be `rows cols`".into()));
        };
        if rows == 0 || cols == 0 {
            return Err(err(hline, "grid must be non-empty".into()));
        }

        let mut cells = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            let (ln, row) = lines
                .next()
                .ok_or_else(|| err(hline + r + 1, format!("expected {rows} grid rows")))?;
            let row = row.trim_end();
            if row.chars().count() != cols {
                return Err(err(ln, format!("expected {cols} cells, found {}", row.chars().count())));
            }
            cells.extend(row.chars().map(|c| match c {
                '.' => Cell::Free,
                '#' => Cell::Wall,
                'S' => Cell::Start,
                'G' => Cell::Goal,
                other => Cell::Marker(other),
            }));
        }

        let mut legend = BTreeMap::new();
        let mut in_legend = false;
        for (ln, line) in lines {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[legend]" {
                in_legend = true;
                continue;
            }
            if !in_legend {
                return Err(err(ln, format!("unexpected line after grid: `{line}`")));
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(ln, "legend entries look like `c = value`".into()))?;
            let mut key_chars = key.trim().chars();
            let (Some(k), None) = (key_chars.next(), key_chars.next()) else {
                return Err(err(ln, "legend key must be a single character".into()));
            };
            legend.insert(k, value.trim().to_string());
        }

        let map = GridMap {
            rows,
            cols,
            cells,
            legend,
        };
        for c in map.markers() {
            if !map.legend.contains_key(&c) {
                return Err(err(hline, format!("marker `{c}` has no legend entry")));
            }
        }
        if map.cells.iter().filter(|c| **c == Cell::Start).count() != 1 {
            return Err(err(hline, "map needs exactly one start cell `S`".into()));
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MorlError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn markers(&self) -> impl Iterator<Item = char> + '_ {
        let mut seen = Vec::new();
        self.cells.iter().filter_map(move |c| match c {
            Cell::Marker(m) if !seen.contains(m) => {
                seen.push(*m);
                Some(*m)
            }
            _ => None,
        })
    }

    pub fn start(&self) -> usize {
        self.cells.iter().position(|c| *c == Cell::Start).expect("validated at parse")
    }

    /// Cell reached by moving from `pos`; walls and edges leave it unchanged.
    pub fn neighbour(&self, pos: usize, action: usize) -> usize {
        let (r, c) = (pos / self.cols, pos % self.cols);
        let (nr, nc) = match action {
            UP if r > 0 => (r - 1, c),
            DOWN if r + 1 < self.rows => (r + 1, c),
            LEFT if c > 0 => (r, c - 1),
            RIGHT if c + 1 < self.cols => (r, c + 1),
            _ => return pos,
        };
        let next = nr * self.cols + nc;
        if self.cells[next] == Cell::Wall {
            pos
        } else {
            next
        }
    }
}

pub const UP: usize = 0;
pub const DOWN: usize = 1;
pub const LEFT: usize = 2;
pub const RIGHT: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<GridMap> {
        GridMap::parse(text, Path::new("test.map"))
    }

    #[test]
    fn parses_grid_and_legend() {
        let m = parse("2 3\nS.a\n#.G\n[legend]\na = 7 # value\n").unwrap();
        assert_eq!((m.rows, m.cols), (2, 3));
        assert_eq!(m.cells[2], Cell::Marker('a'));
        assert_eq!(m.cells[3], Cell::Wall);
        assert_eq!(m.legend[&'a'], "7");
        assert_eq!(m.start(), 0);
    }

    #[test]
    fn blocked_moves_stay_put() {
        let m = parse("2 2\nS.\n#.\n").unwrap();
        assert_eq!(m.neighbour(0, UP), 0);
        assert_eq!(m.neighbour(0, LEFT), 0);
        assert_eq!(m.neighbour(0, DOWN), 0);
        assert_eq!(m.neighbour(0, RIGHT), 1);
        assert_eq!(m.neighbour(1, DOWN), 3);
    }

    #[test]
    fn reports_line_numbers() {
        let e = parse("2 3\nS..\n..\n").unwrap_err();
        assert!(matches!(e, MorlError::Parse { line: 3, .. }), "{e}");
        let e = parse("1 2\nSx\n").unwrap_err();
        assert!(e.to_string().contains("legend"), "{e}");
        let e = parse("1 2\n..\n").unwrap_err();
        assert!(e.to_string().contains("start"), "{e}");
    }
}
