//! Bit-exact interchange format for values passed between a running
//! program and the contract checker.
//!
//! ```text
//! <slamx version="1" spec="<fingerprint>" digest="<sha256>"><v k="int">1</v>...</slamx>
//! ```
//!
//! Every value is a `v` element whose `k` attribute is one of `int`, `real`,
//! `bool`, `str`, `seq`, `rec`, `con`; constructors carry their qualified
//! tag in `t`, record fields are wrapped in `<f n="label">`. Elements
//! without content are self-closing. There is exactly one encoding per
//! value, and the reader accepts nothing else: the `digest` attribute is
//! the SHA-256 of the document without it, so any corruption is reported
//! as malformed rather than decoded into a different value.

use sha2::{Digest, Sha256};

use crate::ast::{TypeExpr, Value};
use crate::ops::{EvalError, EvalResult};
use crate::semantics::ClassHierarchy;

pub const VERSION: u32 = 1;
pub const EXTENSION: &str = "slamx";

fn malformed(msg: impl Into<String>) -> EvalError {
    EvalError::new("MALFORMED_WIRE", msg)
}

fn escape(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
}

pub fn serialize(v: &Value, out: &mut String) {
    match v {
        Value::Int(i) => {
            out.push_str("<v k=\"int\">");
            out.push_str(&i.to_string());
            out.push_str("</v>");
        }
        Value::Real(r) => {
            out.push_str("<v k=\"real\">");
            out.push_str(&r.to_string());
            out.push_str("</v>");
        }
        Value::Bool(b) => {
            out.push_str(if *b { "<v k=\"bool\">true</v>" } else { "<v k=\"bool\">false</v>" });
        }
        Value::Str(s) if s.is_empty() => out.push_str("<v k=\"str\"/>"),
        Value::Str(s) => {
            out.push_str("<v k=\"str\">");
            escape(s, out);
            out.push_str("</v>");
        }
        Value::Seq(items) if items.is_empty() => out.push_str("<v k=\"seq\"/>"),
        Value::Seq(items) => {
            out.push_str("<v k=\"seq\">");
            items.iter().for_each(|x| serialize(x, out));
            out.push_str("</v>");
        }
        Value::Record(fs) if fs.is_empty() => out.push_str("<v k=\"rec\"/>"),
        Value::Record(fs) => {
            out.push_str("<v k=\"rec\">");
            for (l, x) in fs {
                out.push_str("<f n=\"");
                out.push_str(l);
                out.push_str("\">");
                serialize(x, out);
                out.push_str("</f>");
            }
            out.push_str("</v>");
        }
        Value::Con(t, args) => {
            out.push_str("<v k=\"con\" t=\"");
            out.push_str(t);
            if args.is_empty() {
                out.push_str("\"/>");
            } else {
                out.push_str("\">");
                args.iter().for_each(|x| serialize(x, out));
                out.push_str("</v>");
            }
        }
    }
}

pub fn to_string(v: &Value) -> String {
    let mut s = String::new();
    serialize(v, &mut s);
    s
}

struct Reader<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn eat(&mut self, lit: &str) -> bool {
        if self.rest().starts_with(lit) {
            self.pos += lit.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, lit: &str) -> EvalResult<()> {
        if self.eat(lit) {
            Ok(())
        } else {
            Err(malformed(format!("expected `{lit}` at byte {}", self.pos)))
        }
    }

    fn name(&mut self) -> EvalResult<&'a str> {
        let n = self.rest().bytes().take_while(|b| b.is_ascii_alphanumeric() || *b == b'_').count();
        if n == 0 {
            return Err(malformed(format!("expected a name at byte {}", self.pos)));
        }
        let out = &self.rest()[..n];
        self.pos += n;
        Ok(out)
    }

    /// Raw text up to the next `<`.
    fn text(&mut self) -> &'a str {
        let n = self.rest().find('<').unwrap_or(self.rest().len());
        let out = &self.rest()[..n];
        self.pos += n;
        out
    }

    fn value(&mut self, depth: usize) -> EvalResult<Value> {
        if depth > 512 {
            return Err(malformed("nesting too deep"));
        }
        self.expect("<v k=\"")?;
        let kind = self.name()?;
        if kind == "con" {
            self.expect("\" t=\"")?;
            let tag = self.name()?.to_string();
            if self.eat("\"/>") {
                return Ok(Value::Con(tag, Vec::new()));
            }
            self.expect("\">")?;
            let args = self.children(depth)?;
            return Ok(Value::Con(tag, args));
        }
        self.expect("\"")?;
        if self.eat("/>") {
            return match kind {
                "str" => Ok(Value::Str(String::new())),
                "seq" => Ok(Value::Seq(Vec::new())),
                "rec" => Ok(Value::Record(Vec::new())),
                _ => Err(malformed(format!("`{kind}` value cannot be empty"))),
            };
        }
        self.expect(">")?;
        let v = match kind {
            "int" => {
                let t = self.text();
                let i: i64 = t.parse().map_err(|_| malformed(format!("bad integer `{t}`")))?;
                if i.to_string() != t {
                    return Err(malformed(format!("non-canonical integer `{t}`")));
                }
                Value::Int(i)
            }
            "real" => {
                let t = self.text();
                let r: f64 = t.parse().map_err(|_| malformed(format!("bad real `{t}`")))?;
                if r.to_string() != t {
                    return Err(malformed(format!("non-canonical real `{t}`")));
                }
                Value::Real(r)
            }
            "bool" => match self.text() {
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                t => return Err(malformed(format!("bad boolean `{t}`"))),
            },
            "str" => {
                let t = self.text();
                if t.is_empty() {
                    return Err(malformed("empty string must be self-closing"));
                }
                Value::Str(unescape(t)?)
            }
            "seq" => return Ok(Value::Seq(self.children(depth)?)),
            "rec" => {
                let mut fs = Vec::new();
                while self.eat("<f n=\"") {
                    let l = self.name()?.to_string();
                    self.expect("\">")?;
                    let x = self.value(depth + 1)?;
                    self.expect("</f>")?;
                    fs.push((l, x));
                }
                if fs.is_empty() {
                    return Err(malformed("empty record must be self-closing"));
                }
                self.expect("</v>")?;
                return Ok(Value::Record(fs));
            }
            other => return Err(malformed(format!("unknown value kind `{other}`"))),
        };
        self.expect("</v>")?;
        Ok(v)
    }

    /// One or more values followed by `</v>`.
    fn children(&mut self, depth: usize) -> EvalResult<Vec<Value>> {
        let mut out = Vec::new();
        while !self.eat("</v>") {
            out.push(self.value(depth + 1)?);
        }
        if out.is_empty() {
            return Err(malformed("empty element must be self-closing"));
        }
        Ok(out)
    }
}

fn unescape(t: &str) -> EvalResult<String> {
    let mut out = String::new();
    let mut rest = t;
    while let Some(i) = rest.find(['&', '>', '"', '\'']) {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        let (rep, len) = if rest.starts_with("&amp;") {
            ('&', 5)
        } else if rest.starts_with("&lt;") {
            ('<', 4)
        } else if rest.starts_with("&gt;") {
            ('>', 4)
        } else if rest.starts_with("&quot;") {
            ('"', 6)
        } else if rest.starts_with("&apos;") {
            ('\'', 6)
        } else {
            return Err(malformed(format!("unescaped or unknown entity in `{t}`")));
        };
        out.push(rep);
        rest = &rest[len..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Parses exactly one serialized value (no trailing bytes).
pub fn parse_value(text: &str) -> EvalResult<Value> {
    let mut r = Reader { s: text, pos: 0 };
    let v = r.value(0)?;
    if r.pos != text.len() {
        return Err(malformed(format!("trailing bytes after value at byte {}", r.pos)));
    }
    Ok(v)
}

/// Every constructor tag is known and has its declared arity.
pub fn check_tags(v: &Value, h: &ClassHierarchy) -> EvalResult<()> {
    match v {
        Value::Con(t, args) => {
            let s = h
                .schemas
                .get(t)
                .ok_or_else(|| EvalError::new("UNKNOWN_TAG", format!("unknown constructor `{t}`")))?;
            if s.components.len() != args.len() {
                return Err(EvalError::new(
                    "ARITY_MISMATCH",
                    format!("`{t}` has {} components, the document gives {}", s.components.len(), args.len()),
                ));
            }
            args.iter().try_for_each(|a| check_tags(a, h))
        }
        Value::Seq(xs) => xs.iter().try_for_each(|a| check_tags(a, h)),
        Value::Record(fs) => fs.iter().try_for_each(|(_, a)| check_tags(a, h)),
        _ => Ok(()),
    }
}

/// Reads one value of the given class (or a descendant).
pub fn read_value(class: &str, text: &str, h: &ClassHierarchy) -> EvalResult<Value> {
    let v = parse_value(text)?;
    check_tags(&v, h)?;
    let ty = if class == "Seq" {
        TypeExpr::Named("Seq".into(), vec![crate::semantics::any()])
    } else {
        TypeExpr::named(class)
    };
    if !h.conforms(&v, &ty) {
        return Err(EvalError::new("CLASS_MISMATCH", format!("value {v} is not a {class}")));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WireDoc {
    pub version: u32,
    /// Fingerprint of the translated specification.
    pub spec: String,
    /// Arguments, then the result for postcondition checks.
    pub payload: Vec<Value>,
}

fn digest(version: &str, spec: &str, payload: &str) -> String {
    let unsigned = format!("<slamx version=\"{version}\" spec=\"{spec}\">{payload}</slamx>");
    Sha256::digest(unsigned.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_doc(spec: &str, payload: &[Value]) -> String {
    let mut body = String::new();
    payload.iter().for_each(|v| serialize(v, &mut body));
    let version = VERSION.to_string();
    let d = digest(&version, spec, &body);
    format!("<slamx version=\"{version}\" spec=\"{spec}\" digest=\"{d}\">{body}</slamx>\n")
}

fn is_hex64(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Parses a document: structure and digest first, then the version, then
/// the payload.
pub fn read_doc(text: &str) -> EvalResult<WireDoc> {
    let mut r = Reader { s: text, pos: 0 };
    r.expect("<slamx version=\"")?;
    let version = r.name()?;
    r.expect("\" spec=\"")?;
    let spec = r.name()?;
    r.expect("\" digest=\"")?;
    let d = r.name()?;
    r.expect("\">")?;
    if !is_hex64(spec) || !is_hex64(d) {
        return Err(malformed("header hashes must be 64 lowercase hex digits"));
    }
    let body_start = r.pos;
    let end = text.strip_suffix('\n').unwrap_or(text);
    let body_end = end
        .strip_suffix("</slamx>")
        .map(|s| s.len())
        .filter(|&e| e >= body_start)
        .ok_or_else(|| malformed("document is not terminated by `</slamx>`"))?;
    let body = &text[body_start..body_end];
    if digest(version, spec, body) != d {
        return Err(malformed("digest does not match the document"));
    }
    if version != VERSION.to_string() {
        return Err(EvalError::new("VERSION", format!("unsupported wire version `{version}`")));
    }
    let mut br = Reader { s: body, pos: 0 };
    let mut payload = Vec::new();
    while br.pos < body.len() {
        payload.push(br.value(0)?);
    }
    Ok(WireDoc { version: VERSION, spec: spec.to_string(), payload })
}

/// Reads a document produced for the given specification, validating its
/// fingerprint and constructor tags.
pub fn read_doc_for(text: &str, fingerprint: &str, h: &ClassHierarchy) -> EvalResult<WireDoc> {
    let doc = read_doc(text)?;
    if doc.spec != fingerprint {
        return Err(EvalError::new(
            "FINGERPRINT_MISMATCH",
            format!("document was written for specification {}, not {fingerprint}", doc.spec),
        ));
    }
    doc.payload.iter().try_for_each(|v| check_tags(v, h))?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_encodings() {
        let p = Value::con("PointCartesian", vec![Value::Int(1), Value::Real(2.5)]);
        assert_eq!(to_string(&p), r#"<v k="con" t="PointCartesian"><v k="int">1</v><v k="real">2.5</v></v>"#);
        assert_eq!(to_string(&Value::Seq(vec![])), r#"<v k="seq"/>"#);
        let b = Value::con("Bankbank", vec![Value::record([("name", Value::str("A")), ("amount", Value::Real(10.0))])]);
        assert_eq!(
            to_string(&b),
            r#"<v k="con" t="Bankbank"><v k="rec"><f n="name"><v k="str">A</v></f><f n="amount"><v k="real">10</v></f></v></v>"#
        );
        for v in [p, b, Value::str("a<&>\"'b")] {
            assert_eq!(parse_value(&to_string(&v)).unwrap(), v);
        }
    }

    #[test]
    fn non_canonical_and_truncated_input_is_malformed() {
        for bad in [r#"<v k="int">01</v>"#, r#"<v k="real">2.50</v>"#, r#"<v k="seq"></v>"#, r#"<v k="int">1"#, r#"<v k="str">a>b</v>"#] {
            assert_eq!(parse_value(bad).unwrap_err().code, "MALFORMED_WIRE", "{bad}");
        }
    }

    #[test]
    fn document_round_trip_and_guards() {
        let fp = "a".repeat(64);
        let doc = write_doc(&fp, &[Value::Int(3), Value::Bool(false)]);
        let back = read_doc(&doc).unwrap();
        assert_eq!(back.payload, vec![Value::Int(3), Value::Bool(false)]);
        let flipped = doc.replace(">3<", ">4<");
        assert_eq!(read_doc(&flipped).unwrap_err().code, "MALFORMED_WIRE");
        let v2 = {
            let body = r#"<v k="int">3</v>"#;
            format!("<slamx version=\"2\" spec=\"{fp}\" digest=\"{}\">{body}</slamx>", digest("2", &fp, body))
        };
        assert_eq!(read_doc(&v2).unwrap_err().code, "VERSION");
    }
}
