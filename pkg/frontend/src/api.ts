/** Thin HTTP client for the oracle bridge. */

import type { Decision, PendingQuery } from "./types.js";

export class BridgeError extends Error {
  constructor(message: string, public status: number) {
    super(message);
  }
}

export class BridgeClient {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  async getPending(): Promise<PendingQuery[]> {
    const res = await fetch(`${this.baseUrl}/oracle/pending`);
    if (!res.ok) throw new BridgeError(`pending: HTTP ${res.status}`, res.status);
    return (await res.json()) as PendingQuery[];
  }

  /**
   * Submit a decision. Resolves on acceptance; throws BridgeError with
   * status 409 when the id was already answered (exactly-once delivery).
   */
  async submitDecision(id: string, decision: Decision): Promise<void> {
    const res = await fetch(`${this.baseUrl}/oracle/decision/${id}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(decision),
    });
    if (!res.ok) {
      const body = await res.text();
      throw new BridgeError(`decision ${id}: HTTP ${res.status}: ${body}`, res.status);
    }
  }

  async abandon(id: string): Promise<void> {
    const res = await fetch(`${this.baseUrl}/oracle/decision/${id}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ abandon: true }),
    });
    if (!res.ok) throw new BridgeError(`abandon ${id}: HTTP ${res.status}`, res.status);
  }

  async listEpisodes(): Promise<string[]> {
    const res = await fetch(`${this.baseUrl}/episodes`);
    if (!res.ok) throw new BridgeError(`episodes: HTTP ${res.status}`, res.status);
    return (await res.json()) as string[];
  }

  async listEpisodeFiles(episode: string): Promise<string[]> {
    const res = await fetch(`${this.baseUrl}/episodes/${episode}/files`);
    if (!res.ok) throw new BridgeError(`files: HTTP ${res.status}`, res.status);
    return (await res.json()) as string[];
  }

  async fetchEpisodeText(episode: string, path: string): Promise<string> {
    const res = await fetch(`${this.baseUrl}/episodes/${episode}/files/${path}`);
    if (!res.ok) throw new BridgeError(`${path}: HTTP ${res.status}`, res.status);
    return await res.text();
  }

  episodeFileUrl(episode: string, path: string): string {
    return `${this.baseUrl}/episodes/${episode}/files/${path}`;
  }
}
