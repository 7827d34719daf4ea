/** Minimal structural JSON-schema checker.
 *
 * Supports the subset the service's request schema uses ($refs into $defs,
 * discriminated unions, tuples via prefixItems, const, numeric bounds,
 * required properties) - enough for the contract tests and for client-side
 * validation before a request leaves the browser.
 */

export interface SchemaIssue {
  path: string;
  message: string;
}

type Schema = Record<string, any>;

export function validateAgainstSchema(value: unknown, schema: Schema): SchemaIssue[] {
  const issues: SchemaIssue[] = [];
  check(value, schema, schema, "$", issues);
  return issues;
}

function resolveRef(root: Schema, ref: string): Schema {
  if (!ref.startsWith("#/")) throw new Error(`unsupported $ref ${ref}`);
  let node: any = root;
  for (const part of ref.slice(2).split("/")) node = node[part];
  if (!node) throw new Error(`dangling $ref ${ref}`);
  return node;
}

function check(value: unknown, schema: Schema, root: Schema, path: string, issues: SchemaIssue[]): void {
  if (schema.$ref) {
    check(value, resolveRef(root, schema.$ref), root, path, issues);
    return;
  }
  const anyOf: Schema[] | undefined = schema.anyOf ?? schema.oneOf;
  if (anyOf) {
    const branches = anyOf.map((branch) => {
      const sub: SchemaIssue[] = [];
      check(value, branch, root, path, sub);
      return sub;
    });
    if (!branches.some((sub) => sub.length === 0)) {
      const best = branches.reduce((a, b) => (a.length <= b.length ? a : b));
      issues.push(...best);
    }
    return;
  }
  if (schema.const !== undefined) {
    if (value !== schema.const) {
      issues.push({ path, message: `expected const ${JSON.stringify(schema.const)}` });
    }
    return;
  }
  if (schema.enum !== undefined) {
    if (!schema.enum.includes(value)) {
      issues.push({ path, message: `expected one of ${JSON.stringify(schema.enum)}` });
    }
    return;
  }

  switch (schema.type) {
    case "object": {
      if (typeof value !== "object" || value === null || Array.isArray(value)) {
        issues.push({ path, message: "expected object" });
        return;
      }
      const obj = value as Record<string, unknown>;
      for (const req of schema.required ?? []) {
        if (!(req in obj)) issues.push({ path, message: `missing required property ${req}` });
      }
      for (const [key, sub] of Object.entries(schema.properties ?? {})) {
        if (key in obj) check(obj[key], sub as Schema, root, `${path}.${key}`, issues);
      }
      return;
    }
    case "array": {
      if (!Array.isArray(value)) {
        issues.push({ path, message: "expected array" });
        return;
      }
      if (schema.minItems !== undefined && value.length < schema.minItems) {
        issues.push({ path, message: `expected at least ${schema.minItems} items` });
      }
      if (schema.maxItems !== undefined && value.length > schema.maxItems) {
        issues.push({ path, message: `expected at most ${schema.maxItems} items` });
      }
      const prefix: Schema[] = schema.prefixItems ?? [];
      prefix.forEach((sub, i) => {
        if (i < value.length) check(value[i], sub, root, `${path}[${i}]`, issues);
      });
      if (schema.items) {
        for (let i = prefix.length; i < value.length; i++) {
          check(value[i], schema.items, root, `${path}[${i}]`, issues);
        }
      }
      return;
    }
    case "number":
    case "integer": {
      if (typeof value !== "number" || (schema.type === "integer" && !Number.isInteger(value))) {
        issues.push({ path, message: `expected ${schema.type}` });
        return;
      }
      if (schema.exclusiveMinimum !== undefined && value <= schema.exclusiveMinimum) {
        issues.push({ path, message: `expected > ${schema.exclusiveMinimum}` });
      }
      if (schema.minimum !== undefined && value < schema.minimum) {
        issues.push({ path, message: `expected >= ${schema.minimum}` });
      }
      if (schema.maximum !== undefined && value > schema.maximum) {
        issues.push({ path, message: `expected <= ${schema.maximum}` });
      }
      return;
    }
    case "string": {
      if (typeof value !== "string") issues.push({ path, message: "expected string" });
      return;
    }
    case "boolean": {
      if (typeof value !== "boolean") issues.push({ path, message: "expected boolean" });
      return;
    }
    case "null": {
      if (value !== null) issues.push({ path, message: "expected null" });
      return;
    }
    default:
      return; // unconstrained
  }
}
