use super::ast::{BinOp, Builtin, Constant, Expression, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: expected {expected}")]
    Syntax {
        line: usize,
        column: usize,
        expected: String,
    },
    #[error("unknown identifier `{name}` at line {line}, column {column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("exponent `{text}` at line {line}, column {column} is not an integer")]
    NonIntegerExponent {
        text: String,
        line: usize,
        column: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, expected: &str) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        expected: expected.to_string(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let start_col = col;
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, line, column: start_col });
            i += 1;
            col += 1;
            continue;
        }
        let digit_at = |k: usize| k < chars.len() && chars[k].is_ascii_digit();
        if c.is_ascii_digit() || (c == '.' && digit_at(i + 1)) {
            let begin = i;
            while digit_at(i) {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while digit_at(i) {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if digit_at(k) {
                    i = k;
                    while digit_at(i) {
                        i += 1;
                    }
                }
            }
            let text: String = chars[begin..i].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| syntax(line, start_col, "a number"))?;
            if !value.is_finite() {
                return Err(syntax(line, start_col, "a finite number"));
            }
            col += i - begin;
            out.push(Token {
                tok: Tok::Num(value, text),
                line,
                column: start_col,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let begin = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[begin..i].iter().collect();
            col += i - begin;
            out.push(Token {
                tok: Tok::Ident(text),
                line,
                column: start_col,
            });
            continue;
        }
        return Err(syntax(line, start_col, "an operator, number, identifier or parenthesis"));
    }
    out.push(Token { tok: Tok::End, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expression, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expression, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expression::neg(self.factor()?));
        }
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let t = self.bump();
        match t.tok {
            Tok::Num(_, text) => {
                if !text.chars().all(|c| c.is_ascii_digit()) {
                    return Err(ParseError::NonIntegerExponent {
                        text,
                        line: t.line,
                        column: t.column,
                    });
                }
                let n: u32 = text
                    .parse()
                    .map_err(|_| syntax(t.line, t.column, "an exponent that fits in 32 bits"))?;
                Ok(Expression::pow(base, n))
            }
            _ => Err(syntax(t.line, t.column, "an integer exponent")),
        }
    }

    fn atom(&mut self) -> Result<Expression, ParseError> {
        let t = self.bump();
        match t.tok {
            Tok::Num(v, _) => Ok(Expression::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(v) = Var::ALL.iter().find(|v| v.name() == name) {
                    return Ok(Expression::Var(*v));
                }
                match name.as_str() {
                    "pi" => return Ok(Expression::Const(Constant::Pi)),
                    "e" => return Ok(Expression::Const(Constant::E)),
                    _ => {}
                }
                let Some(func) = Builtin::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier {
                        name,
                        line: t.line,
                        column: t.column,
                    });
                };
                let open = self.bump();
                if open.tok != Tok::LParen {
                    return Err(syntax(open.line, open.column, "`(` after function name"));
                }
                let arg = self.expr()?;
                self.expect_rparen()?;
                Ok(Expression::call(func, arg))
            }
            _ => Err(syntax(t.line, t.column, "a number, identifier or `(`")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let t = self.bump();
        if t.tok == Tok::RParen {
            Ok(())
        } else {
            Err(syntax(t.line, t.column, "`)`"))
        }
    }
}

/// Parses a coordinate expression.
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let mut p = Parser {
        toks: lex(source)?,
        pos: 0,
    };
    let e = p.expr()?;
    let t = p.peek();
    if t.tok != Tok::End {
        return Err(syntax(t.line, t.column, "an operator or end of input"));
    }
    Ok(e)
}
