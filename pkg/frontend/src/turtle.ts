/**
 * Minimal Turtle reader for SBT documents as the service serializes
 * them: @prefix directives, IRI subjects, prefixed-name or IRI
 * predicates (plus the `a` keyword), IRI / prefixed-name / quoted-string
 * objects, `;` predicate lists, `.` terminators. That is the full
 * surface of /behaviors/{name} responses; anything outside it raises
 * with a line number so the caller can show a diagnostic.
 */

export interface Term {
  kind: "iri" | "literal";
  value: string;
}

export interface Triple {
  subject: string; // IRIs only in this serialization
  predicate: string;
  object: Term;
}

export class TurtleError extends Error {
  line: number;

  constructor(message: string, line: number) {
    super(`line ${line}: ${message}`);
    this.line = line;
  }
}

const RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";

interface Token {
  kind: "iri" | "pname" | "string" | "punct" | "a";
  value: string;
  line: number;
}

function unescape(raw: string, line: number): string {
  let out = "";
  for (let i = 0; i < raw.length; i++) {
    const ch = raw[i];
    if (ch !== "\\") {
      out += ch;
      continue;
    }
    const next = raw[++i];
    switch (next) {
      case "n": out += "\n"; break;
      case "t": out += "\t"; break;
      case "r": out += "\r"; break;
      case '"': out += '"'; break;
      case "\\": out += "\\"; break;
      case "u": {
        const hex = raw.slice(i + 1, i + 5);
        if (!/^[0-9a-fA-F]{4}$/.test(hex)) {
          throw new TurtleError(`bad \\u escape "${hex}"`, line);
        }
        out += String.fromCharCode(parseInt(hex, 16));
        i += 4;
        break;
      }
      default:
        throw new TurtleError(`unknown escape \\${next}`, line);
    }
  }
  return out;
}

function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  let line = 1;
  let i = 0;
  while (i < text.length) {
    const ch = text[i];
    if (ch === "\n") {
      line++;
      i++;
      continue;
    }
    if (ch === " " || ch === "\t" || ch === "\r") {
      i++;
      continue;
    }
    if (ch === "#") {
      while (i < text.length && text[i] !== "\n") i++;
      continue;
    }
    if (ch === "<") {
      const end = text.indexOf(">", i);
      if (end < 0) throw new TurtleError("unterminated IRI", line);
      tokens.push({ kind: "iri", value: text.slice(i + 1, end), line });
      i = end + 1;
      continue;
    }
    if (ch === '"') {
      let j = i + 1;
      let raw = "";
      for (;;) {
        if (j >= text.length) throw new TurtleError("unterminated string", line);
        if (text[j] === "\\") {
          raw += text[j] + text[j + 1];
          j += 2;
          continue;
        }
        if (text[j] === '"') break;
        raw += text[j];
        j++;
      }
      tokens.push({ kind: "string", value: unescape(raw, line), line });
      i = j + 1;
      continue;
    }
    if (ch === "." || ch === ";" || ch === ",") {
      tokens.push({ kind: "punct", value: ch, line });
      i++;
      continue;
    }
    // bare word: @prefix, the `a` keyword, or a prefixed name
    let j = i;
    while (j < text.length && !/[\s<>"#;,]/.test(text[j])) j++;
    // a trailing dot terminates the statement, not the name
    let word = text.slice(i, j);
    while (word.endsWith(".")) {
      word = word.slice(0, -1);
      j--;
    }
    if (word === "") throw new TurtleError(`cannot read "${text[i]}"`, line);
    tokens.push({ kind: word === "a" ? "a" : "pname", value: word, line });
    i = j;
  }
  return tokens;
}

/** Parse a Turtle document into expanded triples. */
export function parseTurtle(text: string): Triple[] {
  const tokens = tokenize(text);
  const prefixes = new Map<string, string>();
  const triples: Triple[] = [];
  let pos = 0;

  const peek = () => tokens[pos];
  const take = (): Token => {
    const token = tokens[pos++];
    if (!token) {
      const last = tokens[tokens.length - 1];
      throw new TurtleError("unexpected end of document", last ? last.line : 1);
    }
    return token;
  };
  const expectPunct = (value: string) => {
    const token = take();
    if (token.kind !== "punct" || token.value !== value) {
      throw new TurtleError(`expected "${value}", got "${token.value}"`, token.line);
    }
  };

  const expand = (token: Token): string => {
    if (token.kind === "iri") return token.value;
    const colon = token.value.indexOf(":");
    if (colon < 0) throw new TurtleError(`expected an IRI, got "${token.value}"`, token.line);
    const prefix = token.value.slice(0, colon);
    const base = prefixes.get(prefix);
    if (base === undefined) throw new TurtleError(`undeclared prefix "${prefix}:"`, token.line);
    return base + token.value.slice(colon + 1);
  };

  const readObject = (token: Token): Term => {
    if (token.kind === "string") return { kind: "literal", value: token.value };
    if (token.kind === "iri" || token.kind === "pname") {
      return { kind: "iri", value: expand(token) };
    }
    throw new TurtleError(`expected an object, got "${token.value}"`, token.line);
  };

  while (pos < tokens.length) {
    const head = take();
    if (head.kind === "pname" && head.value === "@prefix") {
      const name = take();
      if (name.kind !== "pname" || !name.value.endsWith(":")) {
        throw new TurtleError(`bad prefix name "${name.value}"`, name.line);
      }
      const target = take();
      if (target.kind !== "iri") throw new TurtleError("prefix target must be an IRI", target.line);
      prefixes.set(name.value.slice(0, -1), target.value);
      expectPunct(".");
      continue;
    }
    if (head.kind !== "iri" && head.kind !== "pname") {
      throw new TurtleError(`expected a subject, got "${head.value}"`, head.line);
    }
    const subject = expand(head);
    for (;;) {
      const predToken = take();
      const predicate = predToken.kind === "a" ? RDF + "type" : expand(predToken);
      const object = readObject(take());
      triples.push({ subject, predicate, object });
      const punct = take();
      if (punct.kind !== "punct") {
        throw new TurtleError(`expected ";" or ".", got "${punct.value}"`, punct.line);
      }
      if (punct.value === ".") break;
      if (punct.value !== ";") {
        throw new TurtleError(`unsupported punctuation "${punct.value}"`, punct.line);
      }
    }
  }
  return triples;
}
