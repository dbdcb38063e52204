//! Tables, table regions, and region declarations embedded in response text.
//!
//! A table region is a set of columns plus a set of rows; extracting it from
//! a table yields a rectangular sub-table that preserves the original
//! row/column order. Row identifiers are **0-based data-row positions** (the
//! header line is not a row), and column identifiers are either 0-based
//! indices or column names. Gold data must be produced under the same
//! convention.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from table construction, region binding, and region parsing.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    /// Ragged rows, missing header/separator, or duplicate column names.
    #[error("malformed table: {0}")]
    MalformedTable(String),
    /// A column name that does not resolve against the table.
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    /// A column index past the end of the table.
    #[error("column index {index} out of range for a table with {column_count} columns")]
    ColumnIndexOutOfRange { index: usize, column_count: usize },
    /// A row index past the end of the table.
    #[error("row index {index} out of range for a table with {row_count} rows")]
    RowIndexOutOfRange { index: usize, row_count: usize },
    /// A region declaration marker was found but its body does not parse.
    /// Offsets are character (not byte) positions into the scanned text.
    #[error("region syntax error at {start}..{end}: {message}")]
    RegionSyntax {
        start: usize,
        end: usize,
        message: String,
    },
}

/// A semi-structured table: ordered column names plus a rectangular grid of
/// cell strings. Every row has exactly one cell per column, and column names
/// are unique after whitespace trimming.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableGrid", into = "TableGrid")]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Wire form of a table: the unvalidated `{columns, rows}` record.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableGrid {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl TryFrom<TableGrid> for Table {
    type Error = TableError;

    fn try_from(grid: TableGrid) -> Result<Self, Self::Error> {
        Table::new(grid.columns, grid.rows)
    }
}

impl From<Table> for TableGrid {
    fn from(table: Table) -> Self {
        TableGrid {
            columns: table.columns,
            rows: table.rows,
        }
    }
}

impl Table {
    /// Builds a table, trimming column names and enforcing the invariants:
    /// unique column names and one cell per column in every row.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        let columns: Vec<String> = columns.into_iter().map(|c| c.trim().to_string()).collect();
        for (i, name) in columns.iter().enumerate() {
            if columns[..i].iter().any(|prev| prev == name) {
                return Err(TableError::MalformedTable(format!(
                    "duplicate column name {name:?}"
                )));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::MalformedTable(format!(
                    "row {i} has {} cells, expected {}",
                    row.len(),
                    columns.len()
                )));
            }
        }
        Ok(Table { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Resolves a column name to its index; the name is matched exactly
    /// after whitespace trimming (case-sensitive).
    pub fn column_index(&self, name: &str) -> Option<usize> {
        let trimmed = name.trim();
        self.columns.iter().position(|c| c == trimmed)
    }

    pub fn cell(&self, row: usize, column: usize) -> Option<&str> {
        self.rows.get(row)?.get(column).map(String::as_str)
    }
}

/// Parses a markdown pipe table: a header row, a separator row, and zero or
/// more data rows. Cells are trimmed; column order is preserved. Blank lines
/// are ignored.
pub fn parse_table(text: &str) -> Result<Table, TableError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| TableError::MalformedTable("missing header row".into()))?;
    let separator = lines
        .next()
        .ok_or_else(|| TableError::MalformedTable("missing separator row".into()))?;
    let columns = split_pipe_row(header);
    let separator_cells = split_pipe_row(separator);
    if !separator_cells.iter().all(|c| is_separator_cell(c)) {
        return Err(TableError::MalformedTable(
            "second line is not a separator row".into(),
        ));
    }
    if separator_cells.len() != columns.len() {
        return Err(TableError::MalformedTable(format!(
            "separator row has {} cells, expected {}",
            separator_cells.len(),
            columns.len()
        )));
    }
    let rows: Vec<Vec<String>> = lines.map(split_pipe_row).collect();
    Table::new(columns, rows)
}

fn split_pipe_row(line: &str) -> Vec<String> {
    let inner = line.strip_prefix('|').unwrap_or(line);
    let inner = inner.strip_suffix('|').unwrap_or(inner);
    inner.split('|').map(|cell| cell.trim().to_string()).collect()
}

fn is_separator_cell(cell: &str) -> bool {
    let body = cell.strip_prefix(':').unwrap_or(cell);
    let body = body.strip_suffix(':').unwrap_or(body);
    !body.is_empty() && body.chars().all(|c| c == '-')
}

/// A canonical table region: duplicate-free, sorted sets of 0-based column
/// and row indices. Either axis may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TableRegion {
    columns: BTreeSet<usize>,
    rows: BTreeSet<usize>,
}

impl TableRegion {
    pub fn new(
        columns: impl IntoIterator<Item = usize>,
        rows: impl IntoIterator<Item = usize>,
    ) -> Self {
        TableRegion {
            columns: columns.into_iter().collect(),
            rows: rows.into_iter().collect(),
        }
    }

    /// The region covering every column and row of `table`.
    pub fn full(table: &Table) -> Self {
        TableRegion {
            columns: (0..table.column_count()).collect(),
            rows: (0..table.row_count()).collect(),
        }
    }

    pub fn columns(&self) -> &BTreeSet<usize> {
        &self.columns
    }

    pub fn rows(&self) -> &BTreeSet<usize> {
        &self.rows
    }

    /// True when both axes are empty.
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() && self.rows.is_empty()
    }
}

/// A column identifier as written in a declaration: an index or a name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

/// A region as written in a response or dataset, before binding to a table:
/// columns may be names or indices, duplicates and arbitrary order allowed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRegion {
    pub columns: Vec<ColumnRef>,
    pub rows: Vec<usize>,
}

/// Resolves names to indices (exact match after trimming), removes
/// duplicates, sorts both axes, and rejects out-of-range entries.
pub fn canonicalize_region(raw: &RawRegion, table: &Table) -> Result<TableRegion, TableError> {
    let mut columns = BTreeSet::new();
    for col in &raw.columns {
        let index = match col {
            ColumnRef::Index(i) => {
                if *i >= table.column_count() {
                    return Err(TableError::ColumnIndexOutOfRange {
                        index: *i,
                        column_count: table.column_count(),
                    });
                }
                *i
            }
            ColumnRef::Name(name) => table
                .column_index(name)
                .ok_or_else(|| TableError::UnknownColumn(name.clone()))?,
        };
        columns.insert(index);
    }
    let mut rows = BTreeSet::new();
    for &row in &raw.rows {
        if row >= table.row_count() {
            return Err(TableError::RowIndexOutOfRange {
                index: row,
                row_count: table.row_count(),
            });
        }
        rows.insert(row);
    }
    Ok(TableRegion { columns, rows })
}

/// Extracts the sub-table selected by a region, preserving the original
/// relative order of columns and rows.
pub fn extract_subtable(table: &Table, region: &TableRegion) -> Result<Table, TableError> {
    if let Some(&index) = region.columns.iter().next_back() {
        if index >= table.column_count() {
            return Err(TableError::ColumnIndexOutOfRange {
                index,
                column_count: table.column_count(),
            });
        }
    }
    if let Some(&index) = region.rows.iter().next_back() {
        if index >= table.row_count() {
            return Err(TableError::RowIndexOutOfRange {
                index,
                row_count: table.row_count(),
            });
        }
    }
    let columns: Vec<String> = region
        .columns
        .iter()
        .map(|&c| table.columns[c].clone())
        .collect();
    let rows: Vec<Vec<String>> = region
        .rows
        .iter()
        .map(|&r| {
            region
                .columns
                .iter()
                .map(|&c| table.rows[r][c].clone())
                .collect()
        })
        .collect();
    Ok(Table { columns, rows })
}

/// Serializes a canonical region bound to a table in the exact on-disk form
/// `T_reg = {["<col>", ...], [<row>, ...]}`: column names double-quoted in
/// ascending index order, rows as decimal integers in ascending order.
pub fn serialize_region(region: &TableRegion, table: &Table) -> Result<String, TableError> {
    let mut out = String::from("T_reg = {[");
    for (i, &col) in region.columns.iter().enumerate() {
        let name = table
            .columns
            .get(col)
            .ok_or(TableError::ColumnIndexOutOfRange {
                index: col,
                column_count: table.column_count(),
            })?;
        if i > 0 {
            out.push_str(", ");
        }
        push_quoted(&mut out, name);
    }
    out.push_str("], [");
    for (i, row) in region.rows.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&row.to_string());
    }
    out.push_str("]}");
    Ok(out)
}

/// Serializes an unbound region in the declaration syntax: indices sorted
/// ascending before names sorted lexicographically, duplicates removed.
/// Used for reporting on transcripts when no table is available.
pub fn serialize_raw_region(raw: &RawRegion) -> String {
    let mut indices: Vec<usize> = Vec::new();
    let mut names: Vec<&str> = Vec::new();
    for col in &raw.columns {
        match col {
            ColumnRef::Index(i) => indices.push(*i),
            ColumnRef::Name(n) => names.push(n),
        }
    }
    indices.sort_unstable();
    indices.dedup();
    names.sort_unstable();
    names.dedup();
    let rows: BTreeSet<usize> = raw.rows.iter().copied().collect();

    let mut out = String::from("T_reg = {[");
    let mut first = true;
    for i in indices {
        if !first {
            out.push_str(", ");
        }
        out.push_str(&i.to_string());
        first = false;
    }
    for name in names {
        if !first {
            out.push_str(", ");
        }
        push_quoted(&mut out, name);
        first = false;
    }
    out.push_str("], [");
    for (i, row) in rows.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&row.to_string());
    }
    out.push_str("]}");
    out
}

fn push_quoted(out: &mut String, name: &str) {
    out.push('"');
    for c in name.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

/// A region declaration found in free text, with its character span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRegion {
    pub region: RawRegion,
    /// Character (not byte) offsets of the declaration within the text.
    pub span: Range<usize>,
}

/// Finds the first region declaration in either accepted syntax: the
/// `T_reg = {[...], [...]}` form or a `{"columns": [...], "rows": [...]}`
/// object embedded in the text. Returns `None` when no declaration marker
/// exists, and an error only when a marker is present but unparseable.
pub fn parse_region_from_text(text: &str) -> Result<Option<ParsedRegion>, TableError> {
    match find_region_declarations(text).into_iter().next() {
        None => Ok(None),
        Some(result) => result.map(Some),
    }
}

/// All region declarations in order of appearance. Scanning stops after the
/// first declaration whose marker is present but whose body does not parse.
pub fn find_region_declarations(text: &str) -> Vec<Result<ParsedRegion, TableError>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while let Some((start, kind)) = next_marker(text, pos) {
        match parse_declaration_at(text, start, kind) {
            Ok((region, byte_end)) => {
                let span = char_offset(text, start)..char_offset(text, byte_end);
                out.push(Ok(ParsedRegion { region, span }));
                pos = byte_end;
            }
            Err(e) => {
                out.push(Err(e));
                break;
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MarkerKind {
    Bracket,
    Json,
}

/// Earliest declaration marker at or after byte `from`: either `T_reg`
/// followed by `=`, or `{` whose first key is `"columns"`.
fn next_marker(text: &str, from: usize) -> Option<(usize, MarkerKind)> {
    let bracket = find_bracket_marker(text, from);
    let json = find_json_marker(text, from);
    match (bracket, json) {
        (Some(b), Some(j)) => {
            if b <= j {
                Some((b, MarkerKind::Bracket))
            } else {
                Some((j, MarkerKind::Json))
            }
        }
        (Some(b), None) => Some((b, MarkerKind::Bracket)),
        (None, Some(j)) => Some((j, MarkerKind::Json)),
        (None, None) => None,
    }
}

fn find_bracket_marker(text: &str, from: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut search = from;
    while let Some(rel) = text.get(search..)?.find("T_reg") {
        let start = search + rel;
        let mut after = start + "T_reg".len();
        while after < bytes.len() && bytes[after].is_ascii_whitespace() {
            after += 1;
        }
        if bytes.get(after) == Some(&b'=') {
            return Some(start);
        }
        search = start + "T_reg".len();
    }
    None
}

fn find_json_marker(text: &str, from: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut search = from;
    while let Some(rel) = text.get(search..)?.find("\"columns\"") {
        let key = search + rel;
        // Backtrack over whitespace to the opening brace.
        let mut before = key;
        while before > 0 && bytes[before - 1].is_ascii_whitespace() {
            before -= 1;
        }
        if before > from && bytes[before - 1] == b'{' {
            return Some(before - 1);
        }
        search = key + "\"columns\"".len();
    }
    None
}

fn parse_declaration_at(
    text: &str,
    start: usize,
    kind: MarkerKind,
) -> Result<(RawRegion, usize), TableError> {
    match kind {
        MarkerKind::Bracket => parse_bracket_declaration(text, start),
        MarkerKind::Json => parse_json_declaration(text, start),
    }
}

fn parse_json_declaration(text: &str, start: usize) -> Result<(RawRegion, usize), TableError> {
    let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<RawRegion>();
    match stream.next() {
        Some(Ok(region)) => Ok((region, start + stream.byte_offset())),
        Some(Err(e)) => Err(syntax_error(
            text,
            start,
            start + stream.byte_offset().max(1),
            e.to_string(),
        )),
        None => Err(syntax_error(text, start, start + 1, "empty object".into())),
    }
}

/// Cursor for the `T_reg = {[<col>, ...], [<row>, ...]}` form, where each
/// `<col>` is a double-quoted name or a bare index and each `<row>` is a
/// bare non-negative integer. Whitespace-tolerant between tokens.
struct Cursor<'a> {
    text: &'a str,
    start: usize,
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, byte: u8) -> Result<(), TableError> {
        if self.text.as_bytes().get(self.pos) == Some(&byte) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected {:?}", byte as char)))
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.as_bytes().get(self.pos).copied()
    }

    fn error(&self, message: String) -> TableError {
        syntax_error(self.text, self.start, self.pos.max(self.start + 1), message)
    }

    fn parse_uint(&mut self) -> Result<usize, TableError> {
        let begin = self.pos;
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == begin {
            return Err(self.error("expected an integer".into()));
        }
        self.text[begin..self.pos]
            .parse()
            .map_err(|_| self.error("integer out of range".into()))
    }

    fn parse_quoted(&mut self) -> Result<String, TableError> {
        self.expect(b'"')?;
        let mut value = String::new();
        let mut chars = self.text[self.pos..].char_indices();
        loop {
            let Some((offset, c)) = chars.next() else {
                return Err(self.error("unterminated string".into()));
            };
            match c {
                '"' => {
                    self.pos += offset + 1;
                    return Ok(value);
                }
                '\\' => {
                    let Some((_, escaped)) = chars.next() else {
                        return Err(self.error("unterminated escape".into()));
                    };
                    match escaped {
                        '"' | '\\' => value.push(escaped),
                        other => {
                            value.push('\\');
                            value.push(other);
                        }
                    }
                }
                other => value.push(other),
            }
        }
    }
}

fn parse_bracket_declaration(text: &str, start: usize) -> Result<(RawRegion, usize), TableError> {
    let mut cursor = Cursor {
        text,
        start,
        pos: start + "T_reg".len(),
    };
    cursor.skip_ws();
    cursor.expect(b'=')?;
    cursor.skip_ws();
    cursor.expect(b'{')?;
    cursor.skip_ws();

    cursor.expect(b'[')?;
    let mut columns = Vec::new();
    cursor.skip_ws();
    if cursor.peek() != Some(b']') {
        loop {
            cursor.skip_ws();
            match cursor.peek() {
                Some(b'"') => columns.push(ColumnRef::Name(cursor.parse_quoted()?)),
                Some(b) if b.is_ascii_digit() => {
                    columns.push(ColumnRef::Index(cursor.parse_uint()?))
                }
                _ => return Err(cursor.error("expected a column name or index".into())),
            }
            cursor.skip_ws();
            match cursor.peek() {
                Some(b',') => {
                    cursor.pos += 1;
                }
                Some(b']') => break,
                _ => return Err(cursor.error("expected ',' or ']'".into())),
            }
        }
    }
    cursor.expect(b']')?;
    cursor.skip_ws();
    cursor.expect(b',')?;
    cursor.skip_ws();

    cursor.expect(b'[')?;
    let mut rows = Vec::new();
    cursor.skip_ws();
    if cursor.peek() != Some(b']') {
        loop {
            cursor.skip_ws();
            rows.push(cursor.parse_uint()?);
            cursor.skip_ws();
            match cursor.peek() {
                Some(b',') => {
                    cursor.pos += 1;
                }
                Some(b']') => break,
                _ => return Err(cursor.error("expected ',' or ']'".into())),
            }
        }
    }
    cursor.expect(b']')?;
    cursor.skip_ws();
    cursor.expect(b'}')?;

    Ok((RawRegion { columns, rows }, cursor.pos))
}

fn syntax_error(text: &str, start_byte: usize, end_byte: usize, message: String) -> TableError {
    TableError::RegionSyntax {
        start: char_offset(text, start_byte),
        end: char_offset(text, end_byte.min(text.len())),
        message,
    }
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].chars().count()
}

/// The four response formats questions are asked in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ReasoningKind {
    #[serde(rename = "DP")]
    Dp,
    #[serde(rename = "TCoT")]
    Tcot,
    #[serde(rename = "SCoT")]
    Scot,
    #[serde(rename = "PoT")]
    Pot,
}

impl fmt::Display for ReasoningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ReasoningKind::Dp => "DP",
            ReasoningKind::Tcot => "TCoT",
            ReasoningKind::Scot => "SCoT",
            ReasoningKind::Pot => "PoT",
        };
        f.write_str(name)
    }
}

/// The marker introducing the final answer in a response, matched
/// case-insensitively.
pub const ANSWER_MARKER: &str = "Final Answer:";

/// Finds the last answer marker in the text; returns the character offset of
/// the marker and the trimmed remainder of that line.
pub fn find_answer(text: &str) -> Option<(usize, String)> {
    let bytes = text.as_bytes();
    let marker = ANSWER_MARKER.as_bytes();
    let mut found = None;
    let mut i = 0;
    while i + marker.len() <= bytes.len() {
        if bytes[i..i + marker.len()].eq_ignore_ascii_case(marker) {
            found = Some(i);
        }
        i += 1;
    }
    let start = found?;
    let rest = &text[start + marker.len()..];
    let line = rest.lines().next().unwrap_or("");
    Some((char_offset(text, start), line.trim().to_string()))
}

/// A response with its region declaration and final answer extracted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionAnnotatedResponse {
    pub raw_text: String,
    /// The first region declaration, as written (uncanonicalized).
    pub region: Option<RawRegion>,
    /// Character span of the declaration within `raw_text`.
    pub region_span: Option<Range<usize>>,
    pub answer_text: Option<String>,
    pub reasoning_kind: ReasoningKind,
}

impl RegionAnnotatedResponse {
    /// Extracts the first region declaration and the final answer from raw
    /// response text. Errors only when a declaration marker is present but
    /// unparseable.
    pub fn parse(raw_text: &str, reasoning_kind: ReasoningKind) -> Result<Self, TableError> {
        let parsed = parse_region_from_text(raw_text)?;
        let (region, region_span) = match parsed {
            Some(p) => (Some(p.region), Some(p.span)),
            None => (None, None),
        };
        let answer_text = find_answer(raw_text).map(|(_, answer)| answer);
        Ok(RegionAnnotatedResponse {
            raw_text: raw_text.to_string(),
            region,
            region_span,
            answer_text,
            reasoning_kind,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn table(columns: &[&str], rows: &[&[&str]]) -> Table {
        Table::new(
            columns.iter().map(|c| c.to_string()).collect(),
            rows.iter()
                .map(|r| r.iter().map(|c| c.to_string()).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn parse_single_row_table() {
        let t = parse_table("| a | b |\n|---|---|\n| 1 | 2 |").unwrap();
        assert_eq!(t.columns(), ["a", "b"]);
        assert_eq!(t.rows(), [vec!["1".to_string(), "2".to_string()]]);
    }

    #[test]
    fn parse_empty_body() {
        let t = parse_table("| a |\n|---|").unwrap();
        assert_eq!(t.columns(), ["a"]);
        assert_eq!(t.row_count(), 0);
    }

    #[test]
    fn parse_ragged_row_is_malformed() {
        let err = parse_table("| a | b |\n|---|---|\n| 1 |").unwrap_err();
        assert!(matches!(err, TableError::MalformedTable(_)));
    }

    #[test]
    fn parse_missing_separator_is_malformed() {
        let err = parse_table("| a | b |\n| 1 | 2 |").unwrap_err();
        assert!(matches!(err, TableError::MalformedTable(_)));
        let err = parse_table("| a | b |").unwrap_err();
        assert!(matches!(err, TableError::MalformedTable(_)));
    }

    #[test]
    fn parse_without_outer_pipes_and_alignment_colons() {
        let t = parse_table("a | b\n:--- | ---:\nx | y").unwrap();
        assert_eq!(t.columns(), ["a", "b"]);
        assert_eq!(t.cell(0, 1), Some("y"));
    }

    #[test]
    fn duplicate_columns_rejected_after_trimming() {
        let err = Table::new(vec!["a".into(), " a ".into()], vec![]).unwrap_err();
        assert!(matches!(err, TableError::MalformedTable(_)));
    }

    #[test]
    fn canonicalize_resolves_names_and_dedupes() {
        let row: &[&str] = &["1", "2", "3", "4"];
        let t = table(&["w", "Single", "x", "y"], &[row, row, row]);
        let raw = RawRegion {
            columns: vec![ColumnRef::Name("Single".into())],
            rows: vec![0, 2, 0],
        };
        let region = canonicalize_region(&raw, &t).unwrap();
        assert_eq!(region.columns().iter().copied().collect::<Vec<_>>(), [1]);
        assert_eq!(region.rows().iter().copied().collect::<Vec<_>>(), [0, 2]);
    }

    #[test]
    fn canonicalize_allows_empty_axis() {
        let t = table(&["a"], &[&["1"]]);
        let raw = RawRegion {
            columns: vec![],
            rows: vec![0],
        };
        let region = canonicalize_region(&raw, &t).unwrap();
        assert!(region.columns().is_empty());
        assert_eq!(region.rows().len(), 1);
    }

    #[test]
    fn canonicalize_unknown_column() {
        let t = table(&["a"], &[&["1"]]);
        let raw = RawRegion {
            columns: vec![ColumnRef::Name("Nope".into())],
            rows: vec![0],
        };
        assert_eq!(
            canonicalize_region(&raw, &t).unwrap_err(),
            TableError::UnknownColumn("Nope".into())
        );
    }

    #[test]
    fn canonicalize_row_out_of_range() {
        let t = table(&["a"], &[&["1"]]);
        let raw = RawRegion {
            columns: vec![],
            rows: vec![1],
        };
        assert!(matches!(
            canonicalize_region(&raw, &t).unwrap_err(),
            TableError::RowIndexOutOfRange {
                index: 1,
                row_count: 1
            }
        ));
    }

    #[test]
    fn extract_full_region_is_identity() {
        let t = table(&["a", "b"], &[&["1", "2"], &["3", "4"]]);
        let sub = extract_subtable(&t, &TableRegion::full(&t)).unwrap();
        assert_eq!(sub, t);
    }

    #[test]
    fn extract_empty_rows() {
        let t = table(&["a", "b"], &[&["1", "2"]]);
        let sub = extract_subtable(&t, &TableRegion::new([0], [])).unwrap();
        assert_eq!(sub.columns(), ["a"]);
        assert_eq!(sub.row_count(), 0);
    }

    #[test]
    fn extract_middle_row_subtable() {
        // 3x3 fixture, enumerated by hand: selecting columns {0, 2} and row
        // {1} keeps exactly cells (1,0) and (1,2) of the original.
        let t = table(
            &["a", "b", "c"],
            &[&["00", "01", "02"], &["10", "11", "12"], &["20", "21", "22"]],
        );
        let sub = extract_subtable(&t, &TableRegion::new([0, 2], [1])).unwrap();
        assert_eq!(sub.columns(), ["a", "c"]);
        assert_eq!(sub.rows(), [vec!["10".to_string(), "12".to_string()]]);
    }

    #[test]
    fn extract_cell_count_matches_region_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let cols = rng.random_range(1..=6);
            let rows = rng.random_range(0..=6);
            let t = Table::new(
                (0..cols).map(|c| format!("c{c}")).collect(),
                (0..rows)
                    .map(|r| (0..cols).map(|c| format!("{r}.{c}")).collect())
                    .collect(),
            )
            .unwrap();
            let picked_cols: Vec<usize> =
                (0..cols).filter(|_| rng.random_bool(0.5)).collect();
            let picked_rows: Vec<usize> =
                (0..rows).filter(|_| rng.random_bool(0.5)).collect();
            let region = TableRegion::new(picked_cols, picked_rows);
            let sub = extract_subtable(&t, &region).unwrap();
            let cells: usize = sub.rows().iter().map(Vec::len).sum();
            assert_eq!(cells, region.columns().len() * region.rows().len());
        }
    }

    #[test]
    fn parse_region_bracket_form() {
        let text = "focusing on T_reg = {[\"Single\"], [1, 3]} as shown";
        let parsed = parse_region_from_text(text).unwrap().unwrap();
        assert_eq!(
            parsed.region,
            RawRegion {
                columns: vec![ColumnRef::Name("Single".into())],
                rows: vec![1, 3],
            }
        );
        let span_text: String = text
            .chars()
            .skip(parsed.span.start)
            .take(parsed.span.end - parsed.span.start)
            .collect();
        assert_eq!(span_text, "T_reg = {[\"Single\"], [1, 3]}");
    }

    #[test]
    fn parse_region_absent() {
        assert_eq!(parse_region_from_text("no region here").unwrap(), None);
        // A bare mention without `=` is not a declaration marker.
        assert_eq!(parse_region_from_text("the T_reg concept is neat").unwrap(), None);
    }

    #[test]
    fn parse_region_truncated_body() {
        let err = parse_region_from_text("T_reg = {[}").unwrap_err();
        assert!(matches!(err, TableError::RegionSyntax { .. }));
    }

    #[test]
    fn parse_region_json_form() {
        let text = "region {\"columns\": [\"a\", 2], \"rows\": [0]} found";
        let parsed = parse_region_from_text(text).unwrap().unwrap();
        assert_eq!(
            parsed.region,
            RawRegion {
                columns: vec![ColumnRef::Name("a".into()), ColumnRef::Index(2)],
                rows: vec![0],
            }
        );
    }

    #[test]
    fn parse_region_first_of_several_wins() {
        let text = "T_reg = {[0], [0]} then T_reg = {[1], [1]}";
        let parsed = parse_region_from_text(text).unwrap().unwrap();
        assert_eq!(parsed.region.columns, vec![ColumnRef::Index(0)]);
        let all = find_region_declarations(text);
        assert_eq!(all.len(), 2);
        assert!(all.iter().all(Result::is_ok));
    }

    #[test]
    fn parse_region_indices_and_empty_lists() {
        let parsed = parse_region_from_text("T_reg = {[], []}").unwrap().unwrap();
        assert_eq!(parsed.region, RawRegion::default());
        let parsed = parse_region_from_text("T_reg={[0,2],[1]}").unwrap().unwrap();
        assert_eq!(
            parsed.region.columns,
            vec![ColumnRef::Index(0), ColumnRef::Index(2)]
        );
    }

    #[test]
    fn parse_region_span_is_char_based() {
        // Multi-byte characters before the marker shift byte offsets but not
        // character offsets.
        let text = "表格→ T_reg = {[\"a\"], [0]}";
        let parsed = parse_region_from_text(text).unwrap().unwrap();
        assert_eq!(parsed.span.start, 4);
    }

    #[test]
    fn region_serialization_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let cols = rng.random_range(1..=8);
            let rows = rng.random_range(1..=8);
            let t = Table::new(
                (0..cols).map(|c| format!("col {c}")).collect(),
                (0..rows)
                    .map(|_| (0..cols).map(|_| "x".to_string()).collect())
                    .collect(),
            )
            .unwrap();
            let picked_cols: Vec<usize> =
                (0..cols).filter(|_| rng.random_bool(0.4)).collect();
            let picked_rows: Vec<usize> =
                (0..rows).filter(|_| rng.random_bool(0.4)).collect();
            let region = TableRegion::new(picked_cols, picked_rows);
            let serialized = serialize_region(&region, &t).unwrap();
            let parsed = parse_region_from_text(&serialized).unwrap().unwrap();
            let rebound = canonicalize_region(&parsed.region, &t).unwrap();
            assert_eq!(rebound, region, "round trip failed for {serialized}");
        }
    }

    #[test]
    fn serialize_escapes_quotes_and_backslashes() {
        let t = table(&[r#"he said "hi""#, r"back\slash"], &[&["1", "2"]]);
        let region = TableRegion::new([0, 1], [0]);
        let serialized = serialize_region(&region, &t).unwrap();
        let parsed = parse_region_from_text(&serialized).unwrap().unwrap();
        assert_eq!(canonicalize_region(&parsed.region, &t).unwrap(), region);
    }

    #[test]
    fn serialize_raw_region_orders_indices_before_names() {
        let raw = RawRegion {
            columns: vec![
                ColumnRef::Name("b".into()),
                ColumnRef::Index(3),
                ColumnRef::Name("a".into()),
                ColumnRef::Index(3),
            ],
            rows: vec![2, 0, 2],
        };
        assert_eq!(serialize_raw_region(&raw), r#"T_reg = {[3, "a", "b"], [0, 2]}"#);
    }

    #[test]
    fn response_parse_extracts_region_and_answer() {
        let text = "step one\nT_reg = {[\"a\"], [0]}\nstep two\nFinal Answer: 42\n";
        let response = RegionAnnotatedResponse::parse(text, ReasoningKind::Tcot).unwrap();
        assert!(response.region.is_some());
        assert_eq!(response.answer_text.as_deref(), Some("42"));
    }

    #[test]
    fn response_parse_last_answer_marker_wins() {
        let text = "Final Answer: 1\nreconsidering\nfinal answer: 2";
        let (_, answer) = find_answer(text).unwrap();
        assert_eq!(answer, "2");
    }

    #[test]
    fn reasoning_kind_serde_names() {
        for (kind, name) in [
            (ReasoningKind::Dp, "\"DP\""),
            (ReasoningKind::Tcot, "\"TCoT\""),
            (ReasoningKind::Scot, "\"SCoT\""),
            (ReasoningKind::Pot, "\"PoT\""),
        ] {
            assert_eq!(serde_json::to_string(&kind).unwrap(), name);
        }
    }
}
