/**
 * train/predict entry points.
 *
 *   tsx src/cli.ts train --train-src t.src --train-tgt t.tgt \
 *       --valid-src v.src --valid-tgt v.tgt --out model_dir [--config cfg.json]
 *   tsx src/cli.ts predict --model model_dir --in noisy.txt --out fixed.txt [--beam 5]
 */

import * as fs from 'node:fs';

import * as tf from '@tensorflow/tfjs';

import { initBackend } from './backend.js';
import { DatasetError, readParallel, readTokensPerLine } from './data.js';
import { DEFAULT_CONFIG, TrainConfig, loadArtifact, resolveConfig } from './model.js';
import { Decoder } from './predict.js';
import { trainModel } from './train.js';
import { Vocab } from './vocab.js';

function parseFlags(argv: string[]): Map<string, string> {
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new DatasetError(`malformed arguments near ${key}`);
    }
    flags.set(key.slice(2), value);
  }
  return flags;
}

function need(flags: Map<string, string>, name: string): string {
  const value = flags.get(name);
  if (!value) throw new DatasetError(`missing required flag --${name}`);
  return value;
}

function configFrom(flags: Map<string, string>): TrainConfig {
  const fromFile = flags.has('config')
    ? (JSON.parse(fs.readFileSync(flags.get('config')!, 'utf8')) as Partial<TrainConfig>)
    : {};
  const numeric: Array<[string, keyof TrainConfig]> = [
    ['layers', 'layers'],
    ['hidden', 'hidden'],
    ['lr', 'learningRate'],
    ['batch', 'batchSize'],
    ['epochs', 'maxEpochs'],
    ['patience', 'patience'],
    ['beam', 'beamSize'],
    ['seed', 'seed'],
  ];
  const overrides: Record<string, number> = {};
  for (const [flag, key] of numeric) {
    if (flags.has(flag)) overrides[key] = Number(flags.get(flag));
  }
  return resolveConfig({ ...fromFile, ...overrides });
}

async function runTrain(argv: string[]): Promise<void> {
  const flags = parseFlags(argv);
  await initBackend();
  const config = configFrom(flags);
  const trainPairs = readParallel(need(flags, 'train-src'), need(flags, 'train-tgt'));
  const validPairs = readParallel(need(flags, 'valid-src'), need(flags, 'valid-tgt'));
  const outDir = need(flags, 'out');
  const vocab = Vocab.build(
    (function* () {
      for (const p of trainPairs) {
        yield p.noisy;
        yield p.clean;
      }
    })(),
  );
  console.error(
    `training on ${trainPairs.length} pairs (${validPairs.length} validation), ` +
      `backend=${tf.getBackend()}, config=${JSON.stringify(config)}`,
  );
  const result = await trainModel(trainPairs, validPairs, vocab, config, outDir, (log) =>
    console.error(
      `epoch ${log.epoch}: train ${log.trainLoss.toFixed(4)} ` +
        `valid ${log.validLoss.toFixed(4)} lr ${log.learningRate.toExponential(2)}`,
    ),
  );
  console.error(
    `best epoch ${result.bestEpoch} (valid ${result.bestValidLoss.toFixed(4)}); saved to ${outDir}`,
  );
}

async function runPredict(argv: string[]): Promise<void> {
  const flags = parseFlags(argv);
  await initBackend();
  const artifact = await loadArtifact(need(flags, 'model'));
  const beam = flags.has('beam') ? Number(flags.get('beam')) : artifact.config.beamSize;
  const tokens = readTokensPerLine(need(flags, 'in'));
  const decoder = new Decoder(artifact);
  const decoded = decoder.decode(tokens, beam);
  const outPath = need(flags, 'out');
  fs.writeFileSync(outPath, decoded.length ? decoded.join('\n') + '\n' : '');
  console.error(`decoded ${decoded.length} tokens (beam ${beam}) -> ${outPath}`);
}

async function main(): Promise<number> {
  const [command, ...rest] = process.argv.slice(2);
  try {
    if (command === 'train') await runTrain(rest);
    else if (command === 'predict') await runPredict(rest);
    else {
      console.error('usage: cli.ts <train|predict> [flags]');
      return 1;
    }
    return 0;
  } catch (err) {
    console.error(`error: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
