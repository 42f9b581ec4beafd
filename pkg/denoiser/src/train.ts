/**
 * Training loop: teacher forcing over length-bucketed batches, learning
 * rate decay applied only after a configured epoch, early stopping on
 * validation loss, and a per-epoch JSON training log.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import * as tf from '@tensorflow/tfjs';

import { Batch, DatasetError, ParallelPair, bucketBatches } from './data.js';
import { TrainConfig, buildModel, saveArtifact } from './model.js';
import { EOS, SOS, Vocab } from './vocab.js';

export interface EpochLog {
  epoch: number;
  learningRate: number;
  trainLoss: number;
  validLoss: number;
}

export interface TrainResult {
  log: EpochLog[];
  bestEpoch: number;
  bestValidLoss: number;
}

function oneHotBatch(rows: number[][], vocabSize: number): tf.Tensor3D {
  const batch = rows.length;
  const width = rows[0].length;
  const data = new Float32Array(batch * width * vocabSize);
  for (let b = 0; b < batch; b++) {
    const row = rows[b];
    for (let t = 0; t < width; t++) {
      data[(b * width + t) * vocabSize + row[t]] = 1;
    }
  }
  return tf.tensor3d(data, [batch, width, vocabSize]);
}

export function encodeBatch(batch: Batch, vocab: Vocab) {
  const encRows = batch.pairs.map((p) => vocab.encodeToken(p.noisy));
  const decRows = batch.pairs.map((p) => [SOS, ...vocab.encodeToken(p.clean)]);
  const tgtRows = batch.pairs.map((p) => [...vocab.encodeToken(p.clean), EOS]);
  return {
    encIn: oneHotBatch(encRows, vocab.size),
    decIn: oneHotBatch(decRows, vocab.size),
    target: oneHotBatch(tgtRows, vocab.size),
  };
}

function meanLoss(model: tf.LayersModel, batches: Batch[], vocab: Vocab): number {
  let total = 0;
  let count = 0;
  for (const batch of batches) {
    const { encIn, decIn, target } = encodeBatch(batch, vocab);
    const loss = tf.tidy(() => {
      const pred = model.predictOnBatch([encIn, decIn]) as tf.Tensor;
      return tf.metrics.categoricalCrossentropy(target, pred).mean();
    });
    total += loss.dataSync()[0] * batch.pairs.length;
    count += batch.pairs.length;
    tf.dispose([encIn, decIn, target, loss]);
  }
  return total / count;
}

export async function trainModel(
  trainPairs: ParallelPair[],
  validPairs: ParallelPair[],
  vocab: Vocab,
  config: TrainConfig,
  outDir: string,
  onEpoch?: (log: EpochLog) => void,
): Promise<TrainResult> {
  if (trainPairs.length === 0) throw new DatasetError('training dataset is empty');
  if (validPairs.length === 0) throw new DatasetError('validation dataset is empty');

  const model = buildModel(vocab.size, config);
  const optimizer = tf.train.adam(config.learningRate);
  model.compile({ optimizer, loss: 'categoricalCrossentropy' });
  const validBatches = bucketBatches(validPairs, config.batchSize);

  let learningRate = config.learningRate;
  let bestValidLoss = Infinity;
  let bestEpoch = 0;
  let bestWeights: tf.Tensor[] | null = null;
  let sinceImprovement = 0;
  const log: EpochLog[] = [];

  for (let epoch = 1; epoch <= config.maxEpochs; epoch++) {
    if (epoch > config.lrDecayStart) {
      learningRate *= config.lrDecay;
      // Adam in tfjs keeps its moments; only the step size changes.
      (optimizer as unknown as { learningRate: number }).learningRate = learningRate;
    }
    const batches = bucketBatches(trainPairs, config.batchSize, config.seed + epoch);
    let total = 0;
    let count = 0;
    for (const batch of batches) {
      const { encIn, decIn, target } = encodeBatch(batch, vocab);
      const lossTensor = (await model.trainOnBatch([encIn, decIn], target)) as number;
      total += lossTensor * batch.pairs.length;
      count += batch.pairs.length;
      tf.dispose([encIn, decIn, target]);
    }
    const trainLoss = total / count;
    const validLoss = meanLoss(model, validBatches, vocab);
    const entry: EpochLog = { epoch, learningRate, trainLoss, validLoss };
    log.push(entry);
    onEpoch?.(entry);

    if (validLoss < bestValidLoss - 1e-6) {
      bestValidLoss = validLoss;
      bestEpoch = epoch;
      sinceImprovement = 0;
      if (bestWeights) tf.dispose(bestWeights);
      bestWeights = model.getWeights().map((w) => w.clone());
    } else {
      sinceImprovement += 1;
      if (sinceImprovement >= config.patience) break;
    }
  }

  if (bestWeights) {
    model.setWeights(bestWeights);
    tf.dispose(bestWeights);
  }
  await saveArtifact(outDir, model, vocab, config);
  fs.writeFileSync(
    path.join(outDir, 'training_log.json'),
    JSON.stringify({ log, bestEpoch, bestValidLoss }, null, 2),
  );
  return { log, bestEpoch, bestValidLoss };
}
