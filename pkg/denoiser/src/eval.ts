/** Token-level error rates for line-aligned hypothesis/reference files. */

export function editDistance(a: string, b: string): number {
  const sa = [...a];
  const sb = [...b];
  if (sb.length === 0) return sa.length;
  let prev = Array.from({ length: sb.length + 1 }, (_, j) => j);
  for (let i = 1; i <= sa.length; i++) {
    const cur = [i];
    for (let j = 1; j <= sb.length; j++) {
      const cost = sa[i - 1] === sb[j - 1] ? 0 : 1;
      cur.push(Math.min(prev[j - 1] + cost, prev[j] + 1, cur[j - 1] + 1));
    }
    prev = cur;
  }
  return prev[sb.length];
}

export interface ErrorRates {
  /** One token per line, so word error rate is the token mismatch fraction. */
  wer: number;
  cer: number;
}

export function errorRates(hypotheses: string[], references: string[]): ErrorRates {
  if (hypotheses.length !== references.length) {
    throw new Error(
      `line count mismatch: ${hypotheses.length} hypotheses vs ${references.length} references`,
    );
  }
  let wrongTokens = 0;
  let charEdits = 0;
  let charTotal = 0;
  for (let i = 0; i < references.length; i++) {
    if (hypotheses[i] !== references[i]) wrongTokens += 1;
    charEdits += editDistance(hypotheses[i], references[i]);
    charTotal += [...references[i]].length;
  }
  return {
    wer: references.length ? wrongTokens / references.length : 0,
    cer: charTotal ? charEdits / charTotal : 0,
  };
}
