/**
 * Trend experiment: train one denoiser on realistic noise and one on
 * uniform noise at the matched average rate, then compare word error rates
 * on a test set carrying realistic noise.
 *
 *   tsx src/acceptance.ts --data DIR [--out DIR] [--scale small|full]
 *
 * DIR must contain real_train/.src/.tgt, real_valid.*, uni_train.*,
 * uni_valid.* (char-spaced exports) plus test_noisy.txt / test_clean.txt
 * (one token per line). See ../scripts/make_data.sh for the recipe that
 * produces them with the ocrpost CLI.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

import { initBackend } from './backend.js';
import { ParallelPair, readParallel, readTokensPerLine } from './data.js';
import { errorRates } from './eval.js';
import { DEFAULT_CONFIG, TrainConfig, loadArtifact, resolveConfig } from './model.js';
import { Decoder } from './predict.js';
import { trainModel } from './train.js';
import { Vocab } from './vocab.js';

const SCALES: Record<string, Partial<TrainConfig> & { maxPairs: number }> = {
  // Desk scale per the defaults: 50k pairs, hidden 256.
  full: { maxPairs: 50_000 },
  // For small machines; the trend is visible well below full scale.
  small: {
    maxPairs: 12_000,
    hidden: 64,
    batchSize: 128,
    learningRate: 0.005,
    maxEpochs: 12,
    patience: 3,
  },
};

function flags(): Map<string, string> {
  const out = new Map<string, string>();
  const argv = process.argv.slice(2);
  for (let i = 0; i < argv.length; i += 2) out.set(argv[i].replace(/^--/, ''), argv[i + 1]);
  return out;
}

async function trainOne(
  name: string,
  pairs: ParallelPair[],
  valid: ParallelPair[],
  config: TrainConfig,
  outDir: string,
): Promise<Decoder> {
  console.error(`\n=== training ${name} on ${pairs.length} pairs ===`);
  const vocab = Vocab.build(
    (function* () {
      for (const p of pairs) {
        yield p.noisy;
        yield p.clean;
      }
    })(),
  );
  const started = Date.now();
  const result = await trainModel(pairs, valid, vocab, config, outDir, (log) =>
    console.error(
      `  epoch ${log.epoch}: train ${log.trainLoss.toFixed(4)} valid ${log.validLoss.toFixed(4)}`,
    ),
  );
  console.error(
    `  best epoch ${result.bestEpoch}, ${(Date.now() - started) / 1000 | 0}s elapsed`,
  );
  return new Decoder(await loadArtifact(outDir));
}

async function main(): Promise<number> {
  const args = flags();
  const dataDir = args.get('data');
  if (!dataDir) {
    console.error('usage: acceptance.ts --data DIR [--out DIR] [--scale small|full]');
    return 1;
  }
  const scaleName = args.get('scale') ?? 'full';
  const scale = SCALES[scaleName];
  if (!scale) {
    console.error(`unknown scale ${scaleName}; use small or full`);
    return 1;
  }
  const outDir = args.get('out') ?? path.join(dataDir, 'models');
  const { maxPairs, ...configOverrides } = scale;
  const config = resolveConfig({ ...DEFAULT_CONFIG, ...configOverrides });

  const backend = await initBackend();
  console.error(`backend=${backend}, scale=${scaleName}, config=${JSON.stringify(config)}`);

  const load = (stem: string) =>
    readParallel(path.join(dataDir, `${stem}.src`), path.join(dataDir, `${stem}.tgt`)).slice(
      0,
      maxPairs,
    );
  const realDecoder = await trainOne(
    'realistic-noise model',
    load('real_train'),
    load('real_valid'),
    config,
    path.join(outDir, 'real'),
  );
  const uniDecoder = await trainOne(
    'uniform-noise model',
    load('uni_train'),
    load('uni_valid'),
    config,
    path.join(outDir, 'uni'),
  );

  const noisy = readTokensPerLine(path.join(dataDir, 'test_noisy.txt'));
  const clean = readTokensPerLine(path.join(dataDir, 'test_clean.txt'));
  console.error(`\ndecoding ${noisy.length} test tokens (beam ${config.beamSize})`);
  const baseline = errorRates(noisy, clean);
  const started = Date.now();
  const realOut = realDecoder.decode(noisy, config.beamSize);
  const uniOut = uniDecoder.decode(noisy, config.beamSize);
  console.error(`decoded both in ${(Date.now() - started) / 1000 | 0}s`);
  const real = errorRates(realOut, clean);
  const uni = errorRates(uniOut, clean);

  const rows = [
    ['model', 'WER', 'CER'],
    ['uncorrected', baseline.wer.toFixed(4), baseline.cer.toFixed(4)],
    ['uniform-trained', uni.wer.toFixed(4), uni.cer.toFixed(4)],
    ['realistic-trained', real.wer.toFixed(4), real.cer.toFixed(4)],
  ];
  console.log(rows.map((r) => r.map((c) => c.padEnd(18)).join('')).join('\n'));

  const improves = real.wer < baseline.wer && uni.wer < baseline.wer;
  const ordered = real.wer <= uni.wer;
  console.log(`\nboth models improve over inputs: ${improves}`);
  console.log(`realistic <= uniform:            ${ordered}`);
  fs.writeFileSync(
    path.join(outDir, 'report.json'),
    JSON.stringify({ scale: scaleName, baseline, uniform: uni, realistic: real }, null, 2),
  );
  if (!improves || !ordered) {
    console.error('TREND NOT REPRODUCED');
    return 1;
  }
  console.log('TREND REPRODUCED');
  return 0;
}

main().then((code) => {
  process.exitCode = code;
});
