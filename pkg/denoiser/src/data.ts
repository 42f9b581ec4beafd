/**
 * Readers for the char-spaced parallel dataset format: two files where each
 * line is one token's codepoints separated by single spaces (.src noisy,
 * .tgt clean), plus length-bucketed batching so no padding is ever needed.
 */

import * as fs from 'node:fs';

export interface ParallelPair {
  noisy: string;
  clean: string;
}

export class DatasetError extends Error {}

function parseCharSpacedLine(line: string, path: string, lineNo: number): string {
  if (line.length === 0) {
    throw new DatasetError(`${path}:${lineNo}: empty token line`);
  }
  const parts = line.split(' ');
  for (const part of parts) {
    if ([...part].length !== 1) {
      throw new DatasetError(
        `${path}:${lineNo}: expected single space-separated characters, got ${JSON.stringify(part)}`,
      );
    }
  }
  return parts.join('');
}

export function readCharSpaced(path: string): string[] {
  const raw = fs.readFileSync(path, 'utf8');
  const lines = raw.length === 0 ? [] : raw.replace(/\n$/, '').split('\n');
  return lines.map((line, i) => parseCharSpacedLine(line, path, i + 1));
}

export function readParallel(srcPath: string, tgtPath: string): ParallelPair[] {
  const noisy = readCharSpaced(srcPath);
  const clean = readCharSpaced(tgtPath);
  if (noisy.length !== clean.length) {
    throw new DatasetError(
      `${srcPath} has ${noisy.length} lines but ${tgtPath} has ${clean.length}`,
    );
  }
  return noisy.map((n, i) => ({ noisy: n, clean: clean[i] }));
}

export function readTokensPerLine(path: string): string[] {
  const raw = fs.readFileSync(path, 'utf8');
  if (raw.length === 0) return [];
  return raw.replace(/\n$/, '').split('\n');
}

/** Deterministic 64-bit-ish LCG so data order never depends on Math.random. */
export class Lcg {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0 || 1;
  }

  next(): number {
    // Numerical Recipes LCG constants, kept in uint32 space.
    this.state = (Math.imul(this.state, 1664525) + 1013904223) >>> 0;
    return this.state / 0x100000000;
  }

  shuffle<T>(items: T[]): T[] {
    const arr = items.slice();
    for (let i = arr.length - 1; i > 0; i--) {
      const j = Math.floor(this.next() * (i + 1));
      [arr[i], arr[j]] = [arr[j], arr[i]];
    }
    return arr;
  }
}

export interface Batch {
  pairs: ParallelPair[];
  /** Codepoint length of every noisy token in this batch. */
  srcLen: number;
  /** Codepoint length of every clean token in this batch. */
  tgtLen: number;
}

/**
 * Group pairs by (noisy length, clean length) and slice into batches. Equal
 * lengths inside a batch mean no PAD positions, no loss masking, and no
 * attention over padding.
 */
export function bucketBatches(
  pairs: ParallelPair[],
  batchSize: number,
  shuffleSeed?: number,
): Batch[] {
  const order = shuffleSeed === undefined ? pairs : new Lcg(shuffleSeed).shuffle(pairs);
  const buckets = new Map<string, ParallelPair[]>();
  for (const pair of order) {
    const key = `${[...pair.noisy].length}:${[...pair.clean].length}`;
    let bucket = buckets.get(key);
    if (!bucket) {
      bucket = [];
      buckets.set(key, bucket);
    }
    bucket.push(pair);
  }
  const batches: Batch[] = [];
  for (const key of [...buckets.keys()].sort()) {
    const bucket = buckets.get(key)!;
    const [srcLen, tgtLen] = key.split(':').map(Number);
    for (let i = 0; i < bucket.length; i += batchSize) {
      batches.push({ pairs: bucket.slice(i, i + batchSize), srcLen, tgtLen });
    }
  }
  if (shuffleSeed !== undefined) {
    return new Lcg(shuffleSeed ^ 0x9e3779b9).shuffle(batches);
  }
  return batches;
}
