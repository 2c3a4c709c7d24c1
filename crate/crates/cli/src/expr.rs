//! Numeric values that may be written as literals or arithmetic expressions.
//!
//! Expressions use `evalexpr` syntax with `ln`, `log` (natural), `exp`,
//! `sqrt`, `cbrt`, `abs`, `pi` and `e` in scope. Every literal is read as a
//! float, so `1/3` is one third.

use std::fmt;

use evalexpr::{
    context_map, eval_number_with_context_mut, ContextWithMutableVariables, DefaultNumericTypes, EvalexprError,
    HashMapContext, Value,
};
use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

fn unary(
    f: fn(f64) -> f64,
) -> impl Fn(&Value) -> evalexpr::error::EvalexprResultValue<DefaultNumericTypes> + Clone + Send + Sync {
    move |arg: &Value| Ok(Value::Float(f(arg.as_number()?)))
}

fn context() -> HashMapContext {
    context_map! {
        "ln" => Function::new(unary(f64::ln)),
        "log" => Function::new(unary(f64::ln)),
        "exp" => Function::new(unary(f64::exp)),
        "sqrt" => Function::new(unary(f64::sqrt)),
        "cbrt" => Function::new(unary(f64::cbrt)),
        "abs" => Function::new(unary(f64::abs)),
        "pi" => float std::f64::consts::PI,
        "e" => float std::f64::consts::E,
    }
    .expect("static context")
}

/// Replaces every numeric literal (including exponent forms such as `1e-3`)
/// with a bound variable holding its exact `f64` value.
fn bind_literals(src: &str) -> Result<(String, Vec<f64>), String> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len() + 16);
    let mut values = Vec::new();
    let mut i = 0;
    let is_word = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '.';
    while i < chars.len() {
        if !is_word(chars[i]) {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && is_word(chars[i]) {
            i += 1;
            let exp_sign = i + 1 < chars.len()
                && matches!(chars[i - 1], 'e' | 'E')
                && matches!(chars[i], '+' | '-')
                && chars[i + 1].is_ascii_digit();
            if exp_sign && (chars[start].is_ascii_digit() || chars[start] == '.') {
                i += 1;
            }
        }
        let word: String = chars[start..i].iter().collect();
        if chars[start].is_ascii_digit() || chars[start] == '.' {
            let v: f64 = word.parse().map_err(|_| format!("malformed number `{word}` in `{src}`"))?;
            out.push_str(&format!("__lit{}", values.len()));
            values.push(v);
        } else {
            out.push_str(&word);
        }
    }
    Ok((out, values))
}

/// Evaluates `src` to a finite float.
pub fn eval(src: &str) -> Result<f64, String> {
    let (rewritten, literals) = bind_literals(src)?;
    let mut ctx = context();
    for (k, v) in literals.into_iter().enumerate() {
        ctx.set_value(format!("__lit{k}"), Value::Float(v)).map_err(|e| e.to_string())?;
    }
    let v = eval_number_with_context_mut(&rewritten, &mut ctx)
        .map_err(|e: EvalexprError| format!("cannot evaluate `{src}`: {e}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{src}` evaluates to {v}"))
    }
}

struct NumVisitor;

impl<'de> Visitor<'de> for NumVisitor {
    type Value = f64;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a number or an expression string")
    }
    fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
        Ok(v)
    }
    fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
        Ok(v as f64)
    }
    fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
        eval(v).map_err(E::custom)
    }
}

pub fn de_num<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    d.deserialize_any(NumVisitor)
}

pub fn de_opt_num<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    de_num(d).map(Some)
}

#[derive(Deserialize)]
struct Num(#[serde(deserialize_with = "de_num")] f64);

pub fn de_nums<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    Ok(Vec::<Num>::deserialize(d)?.into_iter().map(|n| n.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_are_exact_floats() {
        assert_eq!(bind_literals("x1 + 2.5e-3*4").unwrap(), ("x1 + __lit0*__lit1".into(), vec![2.5e-3, 4.0]));
        assert_eq!(eval("1/3").unwrap(), 1.0 / 3.0);
        assert_eq!(eval("1e-300").unwrap(), 1e-300);
        assert_eq!(eval("2E+3 - 1").unwrap(), 1999.0);
        assert_eq!(eval("0.1").unwrap(), 0.1);
        assert_eq!(eval("exp(-1)/2").unwrap(), (-1f64).exp() / 2.0);
        assert_eq!(eval("e - 1").unwrap(), std::f64::consts::E - 1.0);
    }

    #[test]
    fn named_functions() {
        assert_eq!(eval("log(2)").unwrap(), 2f64.ln());
        assert_eq!(eval("-ln(2)").unwrap(), -(2f64.ln()));
        assert_eq!(eval("exp(1/2)").unwrap(), 0.5f64.exp());
        assert_eq!(eval("sqrt(2*ln(2))").unwrap(), (2.0 * 2f64.ln()).sqrt());
        assert_eq!(eval("pi").unwrap(), std::f64::consts::PI);
        assert_eq!(eval("-0.25").unwrap(), -0.25);
    }

    #[test]
    fn rejects_garbage() {
        assert!(eval("foo(").is_err());
        assert!(eval("1/0").is_err());
        assert!(eval("1.2.3").is_err());
    }
}
