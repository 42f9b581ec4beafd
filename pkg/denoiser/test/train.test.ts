import * as fs from 'node:fs';
import * as os from 'node:os';
import * as path from 'node:path';

import { beforeAll, describe, expect, it } from 'vitest';

import { initBackend } from '../src/backend.js';
import { DatasetError, Lcg, ParallelPair } from '../src/data.js';
import { resolveConfig } from '../src/model.js';
import { trainModel } from '../src/train.js';
import { Vocab } from '../src/vocab.js';

const CHARS = 'abcdefgh';

function makeDenoisePairs(count: number, seed: number): ParallelPair[] {
  // 8% of characters swapped to a confusable neighbour.
  const rng = new Lcg(seed);
  const vocabWords = Array.from({ length: 40 }, () =>
    Array.from({ length: 3 + Math.floor(rng.next() * 3) }, () =>
      CHARS[Math.floor(rng.next() * CHARS.length)],
    ).join(''),
  );
  return Array.from({ length: count }, () => {
    const clean = vocabWords[Math.floor(rng.next() * vocabWords.length)];
    const noisy = [...clean]
      .map((ch) =>
        rng.next() < 0.08 ? CHARS[(CHARS.indexOf(ch) + 1) % CHARS.length] : ch,
      )
      .join('');
    return { noisy, clean };
  });
}

function tmpDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), 'train-'));
}

beforeAll(async () => {
  await initBackend();
});

describe('trainModel', () => {
  it('validation loss decreases over the first 5 epochs of denoising', async () => {
    const train = makeDenoisePairs(1000, 11);
    const valid = makeDenoisePairs(150, 12);
    const vocab = Vocab.build(train.flatMap((p) => [p.noisy, p.clean]));
    const config = resolveConfig({
      hidden: 32,
      batchSize: 64,
      maxEpochs: 5,
      patience: 5,
      learningRate: 0.01,
      seed: 2,
    });
    const result = await trainModel(train, valid, vocab, config, tmpDir());
    expect(result.log).toHaveLength(5);
    expect(result.log[4].validLoss).toBeLessThan(result.log[0].validLoss);
  });

  it('writes a per-epoch training log next to the artifact', async () => {
    const train = makeDenoisePairs(200, 21);
    const valid = makeDenoisePairs(50, 22);
    const vocab = Vocab.build(train.flatMap((p) => [p.noisy, p.clean]));
    const dir = tmpDir();
    const config = resolveConfig({
      hidden: 16,
      batchSize: 64,
      maxEpochs: 3,
      learningRate: 0.01,
      seed: 2,
    });
    await trainModel(train, valid, vocab, config, dir);
    const log = JSON.parse(fs.readFileSync(path.join(dir, 'training_log.json'), 'utf8'));
    expect(log.log).toHaveLength(3);
    for (const entry of log.log) {
      expect(entry).toHaveProperty('trainLoss');
      expect(entry).toHaveProperty('validLoss');
      expect(entry).toHaveProperty('learningRate');
    }
  });

  it('applies the decay factor only after the configured epoch', async () => {
    const train = makeDenoisePairs(120, 31);
    const valid = makeDenoisePairs(40, 32);
    const vocab = Vocab.build(train.flatMap((p) => [p.noisy, p.clean]));
    const config = resolveConfig({
      hidden: 8,
      batchSize: 64,
      maxEpochs: 4,
      patience: 10,
      learningRate: 0.01,
      lrDecay: 0.75,
      lrDecayStart: 2,
      seed: 2,
    });
    const result = await trainModel(train, valid, vocab, config, tmpDir());
    const rates = result.log.map((l) => l.learningRate);
    expect(rates[0]).toBeCloseTo(0.01, 10);
    expect(rates[1]).toBeCloseTo(0.01, 10);
    expect(rates[2]).toBeCloseTo(0.01 * 0.75, 10);
    expect(rates[3]).toBeCloseTo(0.01 * 0.75 * 0.75, 10);
  });

  it('is reproducible for a fixed seed', async () => {
    const train = makeDenoisePairs(300, 41);
    const valid = makeDenoisePairs(60, 42);
    const vocab = Vocab.build(train.flatMap((p) => [p.noisy, p.clean]));
    const config = resolveConfig({
      hidden: 16,
      batchSize: 64,
      maxEpochs: 3,
      learningRate: 0.01,
      seed: 7,
    });
    const first = await trainModel(train, valid, vocab, config, tmpDir());
    const second = await trainModel(train, valid, vocab, config, tmpDir());
    expect(first.log.length).toBe(second.log.length);
    for (let i = 0; i < first.log.length; i++) {
      expect(Math.abs(first.log[i].trainLoss - second.log[i].trainLoss)).toBeLessThan(1e-4);
      expect(Math.abs(first.log[i].validLoss - second.log[i].validLoss)).toBeLessThan(1e-4);
    }
  });

  it('rejects empty datasets', async () => {
    const valid = makeDenoisePairs(10, 51);
    const vocab = Vocab.build(['abc']);
    const config = resolveConfig({ hidden: 8 });
    await expect(trainModel([], valid, vocab, config, tmpDir())).rejects.toThrow(
      DatasetError,
    );
    await expect(
      trainModel(valid, [], vocab, config, tmpDir()),
    ).rejects.toThrow(DatasetError);
  });
});
