/**
 * Canonical JSON identical to the server's digest form: object keys sorted,
 * compact separators, UTF-8, and floats with an integral value written as
 * integers. Matching bytes here is what makes the basket -> request digest
 * comparable with the digest the server records.
 */

const MAX_SAFE = 2 ** 53;

function formatNumber(value: number): string {
  if (!Number.isFinite(value)) {
    throw new Error("non-finite numbers are not canonicalizable");
  }
  if (Number.isInteger(value) && Math.abs(value) <= MAX_SAFE) {
    // normalizes -0 to "0" as well
    return String(Math.trunc(value) + 0);
  }
  return String(value);
}

function write(value: unknown, out: string[]): void {
  if (value === null) {
    out.push("null");
  } else if (typeof value === "number") {
    out.push(formatNumber(value));
  } else if (typeof value === "boolean") {
    out.push(value ? "true" : "false");
  } else if (typeof value === "string") {
    out.push(JSON.stringify(value));
  } else if (Array.isArray(value)) {
    out.push("[");
    value.forEach((item, i) => {
      if (i > 0) out.push(",");
      write(item, out);
    });
    out.push("]");
  } else if (typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
      a < b ? -1 : a > b ? 1 : 0
    );
    out.push("{");
    entries.forEach(([key, item], i) => {
      if (i > 0) out.push(",");
      out.push(JSON.stringify(key), ":");
      write(item, out);
    });
    out.push("}");
  } else {
    throw new Error(`cannot canonicalize ${typeof value}`);
  }
}

export function canonicalJson(value: unknown): string {
  const out: string[] = [];
  write(value, out);
  return out.join("");
}

export async function sha256Hex(text: string): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", new TextEncoder().encode(text));
  return Array.from(new Uint8Array(digest), (b) => b.toString(16).padStart(2, "0")).join("");
}

export async function canonicalDigest(value: unknown): Promise<string> {
  return sha256Hex(canonicalJson(value));
}
