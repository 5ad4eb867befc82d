// Boots the Python analysis service once for the whole test run.  Requires
// the covarnet package to be installed (pip install -e . in the repo root).

import { spawn, type ChildProcess } from 'node:child_process';
import { SERVICE_BASE } from './config.js';

const PORT = new URL(SERVICE_BASE).port;

async function waitReady(timeoutMs = 60_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      // any HTTP response (404 included) means the server is listening
      await fetch(`${SERVICE_BASE}/datasets/probe/graph`);
      return;
    } catch {
      await new Promise((r) => setTimeout(r, 200));
    }
  }
  throw new Error(`service did not come up on ${SERVICE_BASE}`);
}

let proc: ChildProcess | undefined;

export default async function setup(): Promise<() => Promise<void>> {
  proc = spawn('python3', ['-m', 'covarnet.cli', 'serve', '--host', '127.0.0.1', '--port', PORT], {
    stdio: 'ignore',
  });
  const exited = new Promise<never>((_, reject) => {
    proc!.on('exit', (code) => reject(new Error(`service exited early (code ${code})`)));
  });
  await Promise.race([waitReady(), exited]);
  proc.removeAllListeners('exit');

  return async () => {
    proc?.kill('SIGTERM');
    await new Promise((r) => setTimeout(r, 300));
    if (proc && proc.exitCode === null) proc.kill('SIGKILL');
  };
}
