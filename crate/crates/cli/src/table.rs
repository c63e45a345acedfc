//! Result tables and their CSV / JSON renderings.

use serde_json::{Map, Number, Value as Json};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Na,
}

impl Cell {
    pub fn opt(v: Option<f64>) -> Cell {
        v.map_or(Cell::Na, Cell::Num)
    }

    /// Coordinates joined with `;`.
    pub fn point(x: &[f64]) -> Cell {
        Cell::Text(x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";"))
    }

    pub(crate) fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "NA".to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Na => "NA".to_string(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Num(v) => Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Cell::Int(v) => Json::from(*v),
            Cell::Text(s) => Json::from(s.clone()),
            Cell::Bool(b) => Json::from(*b),
            Cell::Na => Json::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn to_json(&self) -> Vec<u8> {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (c, v) in self.columns.iter().zip(row) {
                    obj.insert(c.to_string(), v.json());
                }
                Json::Object(obj)
            })
            .collect();
        let mut out = serde_json::to_vec_pretty(&rows).expect("json");
        out.push(b'\n');
        out
    }

    pub fn render(&self, format: Format) -> Vec<u8> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_marks_missing_values() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["c1".into(), 2.5.into()]);
        t.push(vec!["c_pde".into(), Cell::Na]);
        assert_eq!(String::from_utf8(t.to_csv()).unwrap(), "name,value\nc1,2.5\nc_pde,NA\n");
        let j: Json = serde_json::from_slice(&t.to_json()).unwrap();
        assert!(j[1]["value"].is_null());
    }
}
