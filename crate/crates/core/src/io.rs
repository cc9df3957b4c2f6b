//! Persisted number formats.
//!
//! Every real written to disk uses 17 significant digits in scientific
//! notation, which round-trips any finite `f64` exactly.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};

use crate::cost::Dataset;

/// `x` with 17 significant digits, e.g. `-1.2500000000000000e-1`.
pub fn render_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON whose floats use [`render_f64`]; non-finite values become `null`.
struct DigitsFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for DigitsFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(render_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes a matrix as an array of rows.
pub fn as_rows<S: serde::Serializer>(m: &ndarray::Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.rows() {
        seq.serialize_element(&row.to_vec())?;
    }
    seq.end()
}

/// Serializes a vector as a flat array.
pub fn as_vec<S: serde::Serializer>(v: &ndarray::Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter())
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(value: &T, writer: W) -> io::Result<()> {
    let mut ser = Serializer::with_formatter(writer, DigitsFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(io::Error::other)
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    write_json(value, &mut buf).expect("writing to memory");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// `z1..zq,y1..yd` header, one observation per line.
pub fn write_dataset_csv<W: Write>(data: &Dataset<f64>, mut out: W) -> io::Result<()> {
    let header: Vec<String> = (1..=data.input_dim())
        .map(|i| format!("z{i}"))
        .chain((1..=data.output_dim()).map(|i| format!("y{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (z, y) in data.inputs().rows().into_iter().zip(data.targets().rows()) {
        let line: Vec<String> = z.iter().chain(y.iter()).map(|&v| render_f64(v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn render_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(render_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }

        #[test]
        fn json_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let back: Vec<f64> = serde_json::from_str(&to_json_string(&vec![x])).unwrap();
            prop_assert_eq!(back[0].to_bits(), x.to_bits());
        }
    }

    #[test]
    fn json_uses_fixed_digits() {
        let s = to_json_string(&serde_json::json!({"a": 0.1, "b": [1.0, f64::NAN]}));
        assert!(s.contains("1.0000000000000001e-1"));
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("null"));
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_layout() {
        let data = Dataset::new(array![[0.5], [-1.0]], array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&data, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "z1,y1,y2");
        assert_eq!(lines[1], "5.0000000000000000e-1,1.0000000000000000e0,2.0000000000000000e0");
    }

    #[test]
    fn matrices_serialize_as_rows() {
        #[derive(Serialize)]
        struct M {
            #[serde(serialize_with = "as_rows")]
            m: ndarray::Array2<f64>,
            #[serde(serialize_with = "as_vec")]
            v: ndarray::Array1<f64>,
        }
        let text = serde_json::to_string(&M {
            m: array![[1.0, 2.0], [3.0, 4.0]],
            v: array![5.0],
        })
        .unwrap();
        assert_eq!(text, r#"{"m":[[1.0,2.0],[3.0,4.0]],"v":[5.0]}"#);
    }
}
