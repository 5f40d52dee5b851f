//! Real-valued symbols from expression strings in the variables `t`, `x`, `xi`.
//!
//! Plain function names (`sin`, `exp`, `tanh`, ...) are accepted alongside
//! evalexpr's `math::` builtins. Integer literals divide as integers, so write
//! `0.5` rather than `1/2`.

use evalexpr::error::EvalexprResultValue;
use evalexpr::{
    build_operator_tree, Context, DefaultNumericTypes, EvalexprError, EvalexprResult, Node,
    Value,
};

use crate::error::{Error, Result};

struct Vars {
    t: Value,
    x: Value,
    xi: Value,
}

const PI: Value = Value::Float(std::f64::consts::PI);

fn unary(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "sin" => f64::sin,
        "cos" => f64::cos,
        "tan" => f64::tan,
        "exp" => f64::exp,
        "ln" => f64::ln,
        "sqrt" => f64::sqrt,
        "abs" => f64::abs,
        "tanh" => f64::tanh,
        "sinh" => f64::sinh,
        "cosh" => f64::cosh,
        "atan" => f64::atan,
        _ => return None,
    })
}

impl Context for Vars {
    type NumericTypes = DefaultNumericTypes;

    fn get_value(&self, identifier: &str) -> Option<&Value> {
        match identifier {
            "t" => Some(&self.t),
            "x" => Some(&self.x),
            "xi" => Some(&self.xi),
            "pi" => Some(&PI),
            _ => None,
        }
    }

    fn call_function(&self, identifier: &str, argument: &Value) -> EvalexprResultValue {
        match unary(identifier) {
            Some(f) => Ok(Value::Float(f(argument.as_number()?))),
            None => Err(EvalexprError::FunctionIdentifierNotFound(identifier.to_string())),
        }
    }

    fn are_builtin_functions_disabled(&self) -> bool {
        false
    }

    fn set_builtin_functions_disabled(&mut self, _disabled: bool) -> EvalexprResult<()> {
        Err(EvalexprError::ContextNotMutable)
    }
}

/// A parsed expression, evaluable from many threads.
#[derive(Debug, Clone)]
pub struct Expression {
    source: String,
    tree: Node,
}

impl Expression {
    pub fn parse(source: &str) -> Result<Self> {
        let tree = build_operator_tree(source).map_err(|e| Error::Expression(format!("{source}: {e}")))?;
        let expr = Self { source: source.to_string(), tree };
        // surface unknown identifiers at parse time
        expr.try_eval(0.0, 0.1, 0.1)?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn try_eval(&self, t: f64, x: f64, xi: f64) -> Result<f64> {
        let vars = Vars { t: Value::Float(t), x: Value::Float(x), xi: Value::Float(xi) };
        self.tree
            .eval_number_with_context(&vars)
            .map_err(|e| Error::Expression(format!("{}: {e}", self.source)))
    }

    /// Evaluates, mapping failures to NaN (caught later by finiteness checks).
    pub fn eval(&self, t: f64, x: f64, xi: f64) -> f64 {
        self.try_eval(t, x, xi).unwrap_or(f64::NAN)
    }
}
